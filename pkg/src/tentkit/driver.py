"""Simulation driver: stack slabs of tents and advance the front state.

The front stores the mapped solution with respect to the current
advancing front; because a tent's bottom equals the front where it is
pitched, tents read and write plain dof ranges with no conversion, and
at slab tops (flat fronts) the stored values are the physical solution.

The implicit wave path caches the factorized stage system per tent
geometry signature: on structured meshes slabs repeat bitwise, so only a
handful of distinct tent shapes are ever assembled.
"""

import math

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .dg import DGSpace, GhostBC, ViscosityParams, make_flux, project_initial
from .errors import SingularStageMatrix, TentkitError
from .laws import law_by_name
from .mapping import build_tent_map
from .mesh import mesh_quality
from .mixedfem import MixedSpace, wave_exact_standing
from .stepping import (
    TentDiagnostics,
    explicit_tent_advance,
    radau_iia,
    substep_count,
)
from .tents import PitchParams, causality_check, pitch_slab

__all__ = ["FrontState", "run_simulation", "error_norm_wave",
           "convergence_study", "wind_tunnel_demo", "standing_wave_config",
           "burgers_exact_smooth"]


class FrontState:
    """Global dof vector on the current advancing front plus diagnostics."""

    def __init__(self, law, scheme, space, dofs):
        self.law = law
        self.scheme = scheme
        self.space = space
        self.dofs = dofs
        self.time = 0.0
        self.slab_index = 0
        self.tent_nu = []          # (slab, tent id, nu_i)
        self.element_nu = None     # per-element max nu over the last slab
        self.causality_margins = []

    def element_max_speeds(self):
        """Per-element max wavespeed of the stored state (exact when the
        front is flat, which is when this is used)."""
        space, law = self.space, self.law
        vals = space.eval_at_quad(self.dofs)   # (L, ne, nq)
        L, ne, nq = vals.shape
        x = space.qpts.reshape(-1, 2).T
        c = law.max_wavespeed(x, self.time, vals.reshape(L, -1))
        c = np.broadcast_to(np.asarray(c), (ne * nq,)).reshape(ne, nq)
        return c.max(axis=1)

    def patch_max_speeds(self, law, elems):
        return self.element_max_speeds()[elems]


def _edge_speeds_from_elements(mesh, elem_speeds, safety):
    c_e = np.empty(mesh.num_edges)
    for e in range(mesh.num_edges):
        adj = mesh.edge_elements[e]
        c_e[e] = max(elem_speeds[t] for t in adj)
    return (1.0 + safety) * c_e


class WaveKernel:
    """Locally implicit advance of the mixed wave system, one tent at a
    time, with geometry-signature caching of the factorized stage system.

    The front is stored discontinuously: every element keeps its own copy
    of its local dofs (edge moments duplicated between neighbors).  A
    tent gathers its patch by averaging the copies of shared edge dofs,
    solves the conforming patch system for all patch dofs, and writes the
    result back elementwise.  Write sets are element-disjoint, so the
    layer contract holds, and no one-sided overwrite of shared conforming
    dofs ever occurs.
    """

    def __init__(self, space, stages):
        self.space = space
        self.tableau = radau_iia(stages)
        self.cache = {}
        self.cache_misses = 0
        self._gather_cache = {}
        # x-dependent damping breaks translation sharing; key on the vertex
        self._uniform = getattr(space, "uniform_coefficients", True)

    def initial_front(self, q0, mu0):
        """Elementwise copies of the interpolated/projected initial data."""
        space = self.space
        conf = space.interpolate_flux(q0) + space.project_scalar(mu0)
        mesh = space.mesh
        out = np.zeros((mesh.num_elements, space.nloc))
        for t in range(mesh.num_elements):
            out[t] = space.local_dofs(conf, t)
        return out

    def to_conforming(self, front):
        """Average duplicated edge copies into a global dof vector."""
        space = self.space
        dofs = np.zeros(space.ndof)
        counts = np.zeros(space.ndof)
        for t in range(space.mesh.num_elements):
            idx = space.elem_dofs[t]
            keep = idx >= 0
            np.add.at(dofs, idx[keep], front[t][keep])
            np.add.at(counts, idx[keep], 1.0)
        return dofs / np.maximum(counts, 1.0)

    def _patch_tables(self, patch):
        """Per-vertex gather/scatter indexing: patch dof order plus the
        element-slot copies of each patch dof."""
        tab = self._gather_cache.get(patch.center)
        if tab is None:
            space = self.space
            order = {}
            copies = []
            for li, t in enumerate(patch.elements):
                for slot, g in enumerate(space.elem_dofs[t]):
                    if g < 0:
                        continue
                    g = int(g)
                    if g not in order:
                        order[g] = len(order)
                        copies.append([])
                    copies[order[g]].append((li, slot))
            nloc = space.nloc
            flat = []
            weights = []
            scatter = []
            for j, cp in enumerate(copies):
                w = 1.0 / len(cp)
                for (li, slot) in cp:
                    flat.append(li * nloc + slot)
                    weights.append(w)
                    scatter.append(j)
            tab = {
                "n": len(copies),
                "flat": np.array(flat, dtype=np.int64),
                "weights": np.array(weights),
                "src": np.array(scatter, dtype=np.int64),
            }
            self._gather_cache[patch.center] = tab
        return tab

    def _signature(self, tent, tmap):
        """Geometry of everything that enters the stage system, relative
        to the center vertex, in assembly order.  Matrices and the
        patch-local dof structure coincide whenever signatures do."""
        mesh = self.space.mesh
        patch = tent.patch
        center = mesh.vertices[patch.center]
        parts = []
        if not self._uniform:
            parts.append(np.array([float(patch.center)]))
        boundary = self.space.mesh.boundary_tags
        for i, t in enumerate(patch.elements):
            tri = mesh.vertices[mesh.elements[t]] - center
            parts.append(np.round(tri.ravel(), 12))
            parts.append(np.round(tmap.tau_bot[tmap.elem_vertices[i]]
                                  - tmap.tau_bot[0], 12))
            parts.append(np.round(tmap.tau_top[tmap.elem_vertices[i]]
                                  - tmap.tau_bot[0], 12))
            flags = [1.0 if int(e) in boundary else 0.0
                     for e in mesh.element_edges[t]]
            parts.append(np.array(flags))
        return np.concatenate(parts).tobytes()

    def _build(self, tent, tmap):
        space = self.space
        patch = tent.patch
        order = {}
        for t in patch.elements:
            for g in space.elem_dofs[t]:
                if g >= 0 and int(g) not in order:
                    order[int(g)] = len(order)
        P = len(order)
        nloc = space.nloc
        nT = len(patch.elements)
        H0 = np.zeros((P, P))
        H1 = np.zeros((P, P))
        S = np.zeros((P, P))
        # weak-restart pairing: y0 = <broken front, psi>_{H(0)} assembled
        # from element H blocks against elementwise dof copies
        G = np.zeros((P, nT * nloc))
        for i, t in enumerate(patch.elements):
            idx = space.elem_dofs[t]
            keep = idx >= 0
            gi = np.array([order[int(g)] for g in idx[keep]])
            He0 = space.elem_H(t, tmap.grad_bot[i])
            H0[np.ix_(gi, gi)] += He0[np.ix_(keep, keep)]
            H1[np.ix_(gi, gi)] += space.elem_H(t, tmap.grad_top[i])[
                np.ix_(keep, keep)]
            Se = space.elem_S(t, tmap.delta_elem[i],
                              (tmap.grad_top - tmap.grad_bot)[i])
            S[np.ix_(gi, gi)] += Se[np.ix_(keep, keep)]
            G[gi, i * nloc:(i + 1) * nloc] = He0[keep]
        tab = self.tableau
        s = tab.s
        big = np.zeros((s * P, s * P))
        for l in range(s):
            c = tab.c[l]
            big[l * P:(l + 1) * P, l * P:(l + 1) * P] = \
                (1.0 - c) * H0 + c * H1
            for m in range(s):
                big[l * P:(l + 1) * P, m * P:(m + 1) * P] -= \
                    tab.a[l, m] * S
        try:
            lu = lu_factor(big)
        except Exception:
            raise SingularStageMatrix(
                "tent %d at vertex %d" % (tent.id, tent.vertex))
        return {"lu": lu, "G": G, "P": P}

    def advance(self, tent, tmap, front):
        """front: (num_elements, nloc) elementwise dof copies, updated in
        place on the patch elements."""
        tables = self._patch_tables(tent.patch)
        key = self._signature(tent, tmap)
        entry = self.cache.get(key)
        if entry is None:
            entry = self._build(tent, tmap)
            self.cache[key] = entry
            self.cache_misses += 1
        P = entry["P"]
        patch_flat = front[tent.patch.elements].reshape(-1)
        y0 = entry["G"] @ patch_flat
        s = self.tableau.s
        sol = lu_solve(entry["lu"], np.tile(y0, s))
        u1 = sol[(s - 1) * P:]
        patch_flat[:] = 0.0
        patch_flat[tables["flat"]] = u1[tables["src"]]
        front[tent.patch.elements] = patch_flat.reshape(
            len(tent.patch.elements), -1)


class ExplicitKernel:
    def __init__(self, space, law, visc, flux, bc, m, method="ssp2"):
        self.space = space
        self.law = law
        self.visc = visc
        self.flux = flux
        self.bc = bc
        self.m = m
        self.method = method

    def advance(self, tent, tmap, dofs, diag=None):
        ctx = self.space.patch_context(tent.patch)
        U0 = dofs[tent.patch.elements]
        out = explicit_tent_advance(ctx, tmap, self.law, U0, self.m,
                                    self.visc, flux=self.flux, bc=self.bc,
                                    method=self.method, diag=diag)
        dofs[tent.patch.elements] = out
        return diag


def _tent_order(slab, execution):
    if execution == "pitch":
        return [t.id for t in slab.tents]
    if execution == "layers":
        return [tid for layer in slab.layers for tid in sorted(layer)]
    raise ValueError("execution must be 'pitch' or 'layers'")


def run_simulation(mesh, law, scheme, p, t_max, t_slab, initial,
                   pitch_speed=None, stages=None, gamma=0.5, ctau=None,
                   substeps=None, substep_safety=2.0, visc=None,
                   flux="rusanov", bc=None, execution="pitch",
                   speed_safety=0.1, check_causality=True,
                   causality_margin=1e-8, rk_method="ssp2",
                   collect_element_nu=False, resume=None):
    """March the front through stacked slabs of tents for t_max time units.

    scheme 'implicit_wave' pairs the wave law with the mixed space and
    Radau stages (default s = p); 'explicit_dg' pairs the nonlinear laws
    with the broken space, SSP substeps and entropy viscosity.  `initial`
    is (q0, mu0) callables for the wave path, or u0(x)->(L,n) otherwise;
    passing `resume` continues from an earlier front instead (initial is
    then ignored).  For laws with state-dependent speeds the edge speeds
    are re-estimated at every slab start from the current front.
    """
    if resume is not None:
        front = resume
        space = front.space
        if scheme != front.scheme:
            raise ValueError("resume scheme mismatch")
        if scheme == "implicit_wave":
            kernel = WaveKernel(space, stages if stages is not None else p)
        else:
            if visc is None:
                visc = ViscosityParams(p=p)
            flux_fn = make_flux(flux, law) if isinstance(flux, str) else flux
            if bc is None:
                bc = GhostBC(law)
            m = substeps if substeps is not None else substep_count(
                p, substep_safety)
            kernel = ExplicitKernel(space, law, visc, flux_fn, bc, m,
                                    method=rk_method)
    elif scheme == "implicit_wave":
        if law.name != "wave":
            raise ValueError("implicit_wave pairs with the wave law")
        space = MixedSpace(mesh, p, alpha=law.alpha,
                           beta_damp=law.beta_damp)
        q0, mu0 = initial
        kernel = WaveKernel(space, stages if stages is not None else p)
        dofs = kernel.initial_front(q0, mu0)
        front = FrontState(law, scheme, space, dofs)
    elif scheme == "explicit_dg":
        if law.name == "wave":
            raise ValueError("explicit_dg pairs with transport/burgers/euler")
        space = DGSpace(mesh, p, L=law.L)
        dofs = project_initial(initial, space)
        if visc is None:
            visc = ViscosityParams(p=p)
        flux_fn = make_flux(flux, law) if isinstance(flux, str) else flux
        if bc is None:
            bc = GhostBC(law)
        m = substeps if substeps is not None else substep_count(
            p, substep_safety)
        kernel = ExplicitKernel(space, law, visc, flux_fn, bc, m,
                                method=rk_method)
        front = FrontState(law, scheme, space, dofs)
    else:
        raise ValueError("unknown scheme %r" % scheme)

    state_dependent = law.name in ("burgers", "euler")
    if pitch_speed is None and not state_dependent:
        pitch_speed = float(np.max(law.max_wavespeed(
            mesh.vertices.T, 0.0, None)))
    slab_cache = {}
    remaining = t_max
    while remaining > 1e-13 * max(1.0, t_max):
        height = min(t_slab, remaining)
        if state_dependent:
            elem_speeds = front.element_max_speeds()
            if pitch_speed is not None:
                elem_speeds = np.maximum(elem_speeds, pitch_speed)
            # a resting region has zero wavespeed; any positive bound is
            # causally valid there, so floor the estimate to keep the
            # pitching parameters legal (heights then clamp at the slab)
            floor = max(1e-8, 1e-3 * float(elem_speeds.max()))
            elem_speeds = np.maximum(elem_speeds, floor)
            c_e = _edge_speeds_from_elements(mesh, elem_speeds, speed_safety)
            params = PitchParams(mesh, height, c_e, ctau=ctau, gamma=gamma)
            slab = pitch_slab(mesh, params)
        else:
            slab = slab_cache.get(height)
            if slab is None:
                params = PitchParams(mesh, height, pitch_speed, ctau=ctau,
                                     gamma=gamma)
                slab = pitch_slab(mesh, params)
                slab_cache[height] = slab
        if collect_element_nu:
            front.element_nu = np.zeros(mesh.num_elements)
        elem_speeds_now = front.element_max_speeds() if check_causality \
            and scheme == "explicit_dg" else None
        for tid in _tent_order(slab, execution):
            tent = slab.tents[tid]
            tmap = build_tent_map(tent)
            if check_causality:
                if scheme == "implicit_wave":
                    speeds = np.full(len(tent.patch.elements),
                                     float(np.max(law.max_wavespeed(
                                         None, 0.0, None))))
                else:
                    speeds = elem_speeds_now[tent.patch.elements]
                if not causality_check(tent, element_speeds=speeds,
                                       margin=causality_margin):
                    raise TentkitError(
                        "causality violated at tent %d (vertex %d, slab %d)"
                        % (tent.id, tent.vertex, front.slab_index))
            if scheme == "implicit_wave":
                kernel.advance(tent, tmap, front.dofs)
            else:
                diag = TentDiagnostics()
                kernel.advance(tent, tmap, front.dofs, diag)
                if diag.nu_max > 0:
                    front.tent_nu.append(
                        (front.slab_index, tent.id, diag.nu_max))
                if collect_element_nu:
                    els = tent.patch.elements
                    front.element_nu[els] = np.maximum(
                        front.element_nu[els], diag.nu_max)
        front.time += height
        front.slab_index += 1
        remaining -= height
    return front


def error_norm_wave(front, t):
    """L2 error of (q, mu) against the standing wave at a flat front."""
    return front.space.error_norm_broken(
        front.dofs,
        lambda x: wave_exact_standing(x, t)[0],
        lambda x: wave_exact_standing(x, t)[1])


def standing_wave_config(level):
    """Mesh-level-dependent protocol of the reference study: unit square,
    speed 2 drives the tents, slab height 2^-level / 8."""
    return {"t_slab": 2.0 ** -level / 8.0, "pitch_speed": 2.0}


def _regression_slope(hs, es):
    x = np.log(np.asarray(hs))
    y = np.log(np.asarray(es))
    A = np.vstack([x, np.ones_like(x)]).T
    slope, _ = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(slope)


def convergence_study(p_list, levels, scheme="implicit_wave", t_max=1.0,
                      law=None, initial=None, exact=None, stages=None,
                      verbose=False, **kwargs):
    """Error-vs-h sweep; returns rows (p, h, e, slope) with the
    least-squares slope repeated along each p."""
    from .mesh import generate_structured_square

    rows = []
    for p in p_list:
        hs, es = [], []
        for level in levels:
            mesh = generate_structured_square(level)
            if scheme == "implicit_wave":
                run_law = law_by_name("wave")
                cfg = standing_wave_config(level)
                init = (lambda x: np.zeros((2, x.shape[1])),
                        lambda x: np.cos(np.pi * x[0]) * np.cos(np.pi * x[1]))
                front = run_simulation(
                    mesh, run_law, scheme, p, t_max, cfg["t_slab"], init,
                    pitch_speed=cfg["pitch_speed"],
                    stages=stages if stages is not None else p, **kwargs)
                e = error_norm_wave(front, t_max)
            else:
                run_law = law
                front = run_simulation(mesh, run_law, scheme, p, t_max,
                                       kwargs.pop("t_slab", 2.0 ** -level / 4),
                                       initial, **kwargs)
                space = front.space
                e = space.l2_error(front.dofs, lambda x: exact(x, t_max))
            hs.append(2.0 ** -level)
            es.append(e)
            if verbose:
                print("p=%d level=%d h=%g e=%.3e" % (p, level, hs[-1], e))
        slope = _regression_slope(hs, es)
        for h, e in zip(hs, es):
            rows.append((p, h, e, slope))
    return rows


def burgers_exact_smooth(u0, x, t, iterations=60):
    """Pre-shock solution by characteristics: u = u0(x1 - u t, x2 - u t)."""
    u = np.asarray(u0(x)).reshape(-1)
    for _ in range(iterations):
        shifted = np.stack([x[0] - u * t, x[1] - u * t])
        u_new = np.asarray(u0(shifted)).reshape(-1)
        if np.max(np.abs(u_new - u)) < 1e-14:
            u = u_new
            break
        u = u_new
    return u[None]


def wind_tunnel_demo(h_target=0.16, h_corner=0.035, p=2, t_end=0.5,
                     snapshot_times=None, flux="rusanov", substeps=None,
                     t_slab=None, speed_safety=0.2, verbose=False):
    """Reduced-scale forward-facing-step run: Mach 3 inflow, entropy
    viscosity shock capturing.  Returns (mesh, snapshots, front).

    Snapshots carry vertex-sampled density, cell means, pressure means,
    and the per-element viscosity of the last slab before each time.
    """
    from .cli_io import FieldSnapshot
    from .mesh import generate_step_channel

    mesh = generate_step_channel(h_target, h_corner)
    law = law_by_name("euler")
    state = np.array([1.4, 4.2, 0.0, 8.8])

    def initial(x):
        return np.broadcast_to(state[:, None], (4, x.shape[1])).copy()

    bc = GhostBC(law, inflow=state)
    if t_slab is None:
        _, hmin, _, _ = mesh_quality(mesh)
        t_slab = hmin / 16.0
    if snapshot_times is None:
        snapshot_times = [0.5 * t_end, t_end]
    snap_times = sorted(set(float(s) for s in snapshot_times))
    snapshots = []
    front = None
    t_prev = 0.0
    for t_snap in snap_times:
        seg = t_snap - t_prev
        if seg < -1e-12:
            raise ValueError("snapshot times must be increasing")
        front = run_simulation(
            mesh, law, "explicit_dg", p, seg, t_slab, initial,
            bc=bc, flux=flux, substeps=substeps,
            speed_safety=speed_safety, collect_element_nu=True,
            resume=front)
        t_prev = t_snap
        snapshots.append(FieldSnapshot.from_front(
            mesh, front, time=t_snap, element_nu=front.element_nu))
        if verbose:
            rho = snapshots[-1].cell_data["density"]
            print("t=%.3f rho in [%.3f, %.3f] nu_max=%.3e"
                  % (t_snap, rho.min(), rho.max(),
                     front.element_nu.max() if front.element_nu is not None
                     else 0.0))
    return mesh, snapshots, front
