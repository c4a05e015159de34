"""H(div)-conforming BDM_p x broken P_p spaces for the mapped wave system.

Flux fields are vector polynomials of degree p with continuous normal
traces; their degrees of freedom are edge normal moments against Legendre
polynomials (shared between neighbors through a global edge orientation)
plus interior moments against grad P_{p-1} and curl(bubble P_{p-2}).
Scalar fields reuse the orthonormal modal basis of the DG module.

Boundary edges carry the constraint r.n = 0 (solid-wall condition): their
dofs are excluded from the global numbering and treated as zeros.

The mapped system matrices of one tent decompose affinely:
    H(gphi) = H0 + gphi_1 Hx + gphi_2 Hy        (per element)
    S(delta) = sum_c delta_c S_c + sum_j (grad delta)_j T_j
which makes per-tent assembly a handful of small AXPYs.
"""

import numpy as np

from .dg import DGSpace
from .errors import InvariantViolation
from .quadrature import edge_rule, triangle_rule

__all__ = ["MixedSpace", "wave_exact_standing"]


def _legendre01(q, s):
    from numpy.polynomial.legendre import legval
    c = np.zeros(q + 1)
    c[q] = 1.0
    return legval(2.0 * s - 1.0, c)


class MixedSpace:
    """Global mixed space with patch-extractable element matrices."""

    def __init__(self, mesh, p, alpha=None, beta_damp=0.0):
        if p < 1:
            raise ValueError("the flux family needs p >= 1")
        self.mesh = mesh
        self.p = p
        if alpha is None:
            alpha = np.eye(2)
        self.alpha = np.asarray(alpha, dtype=float)
        self.alpha_inv = np.linalg.inv(self.alpha)
        self.uniform_coefficients = not callable(beta_damp)
        self.beta_damp = beta_damp if callable(beta_damp) else (
            lambda x, b=float(beta_damp): b * np.ones(np.shape(x)[1:]))
        self.scalar = DGSpace(mesh, p, L=1, quad_degree=2 * p + 2)
        self.np_s = self.scalar.nb                 # scalar dofs / element
        self.nfl = (p + 1) * (p + 2)               # flux dofs / element
        self.n_edge = p + 1                        # flux dofs / edge
        self.n_int = p * p - 1                     # interior flux dofs / element
        self.nloc = self.nfl + self.np_s
        self._number_dofs()
        self._build_elements()

    # -- global numbering --------------------------------------------------

    def _number_dofs(self):
        mesh = self.mesh
        boundary = set(int(e) for e in mesh.boundary_edges)
        self.edge_offset = {}
        offset = 0
        for e in range(mesh.num_edges):
            if e not in boundary:
                self.edge_offset[e] = offset
                offset += self.n_edge
        self.n_edge_dofs = offset
        self.int_offset = offset
        offset += mesh.num_elements * self.n_int
        self.n_flux = offset
        self.scalar_offset = offset
        offset += mesh.num_elements * self.np_s
        self.ndof = offset
        # element-local -> global (or -1 for constrained boundary dofs)
        self.elem_dofs = -np.ones((mesh.num_elements, self.nloc), dtype=np.int64)
        for t in range(mesh.num_elements):
            col = 0
            for eid in mesh.element_edges[t]:
                base = self.edge_offset.get(int(eid))
                for q in range(self.n_edge):
                    if base is not None:
                        self.elem_dofs[t, col] = base + q
                    col += 1
            for k in range(self.n_int):
                self.elem_dofs[t, col] = self.int_offset + t * self.n_int + k
                col += 1
            for k in range(self.np_s):
                self.elem_dofs[t, col] = self.scalar_offset + t * self.np_s + k
                col += 1

    # -- element construction ------------------------------------------------

    def _flux_monomials(self, t, pts):
        """Vector monomial values (n, nfl, 2) and divergences (n, nfl)."""
        sc = self.scalar
        V, dV = sc._monomials(t, pts)
        n = V.shape[0]
        np_s = self.np_s
        vals = np.zeros((n, self.nfl, 2))
        div = np.zeros((n, self.nfl))
        vals[:, :np_s, 0] = V
        vals[:, np_s:, 1] = V
        div[:, :np_s] = dV[:, :, 0]
        div[:, np_s:] = dV[:, :, 1]
        return vals, div

    def _build_elements(self):
        mesh = self.mesh
        p = self.p
        sc = self.scalar
        ne = mesh.num_elements
        nq = sc.nq
        s_e, w_e = edge_rule(p + 2)
        # interior moment fields, in the scaled element coordinates
        grads = [(i, j) for tot in range(1, p) for i in range(tot, -1, -1)
                 for j in (tot - i,)]
        bubbles = _monomials_upto(p - 2)
        self.flux_coeff = np.empty((ne, self.nfl, self.nfl))
        self.flux_q = np.empty((ne, nq, self.nfl, 2))
        self.div_q = np.empty((ne, nq, self.nfl))
        for t in range(ne):
            Vmat = np.zeros((self.nfl, self.nfl))
            row = 0
            for eid in mesh.element_edges[t]:
                a, b = mesh.edges[eid]
                pa, pb = mesh.vertices[a], mesh.vertices[b]
                pts = pa[None] + s_e[:, None] * (pb - pa)[None]
                tang = pb - pa
                ln = np.hypot(*tang)
                normal = np.array([tang[1], -tang[0]]) / ln
                mono, _ = self._flux_monomials(t, pts)
                mono_n = mono @ normal
                for q in range(self.n_edge):
                    leg = _legendre01(q, s_e)
                    Vmat[row] = np.einsum("k,km->m", ln * w_e * leg, mono_n)
                    row += 1
            if self.n_int:
                pts = sc.qpts[t]
                w = sc.qw[t]
                mono, _ = self._flux_monomials(t, pts)
                xi = (pts - sc.centers[t]) / sc.scales[t]
                lam = _barycentric(mesh.vertices[mesh.elements[t]], pts)
                bub = lam[:, 0] * lam[:, 1] * lam[:, 2]
                dlam = _barycentric_grads(mesh.vertices[mesh.elements[t]])
                dbub = (dlam[0][None] * (lam[:, 1] * lam[:, 2])[:, None]
                        + dlam[1][None] * (lam[:, 0] * lam[:, 2])[:, None]
                        + dlam[2][None] * (lam[:, 0] * lam[:, 1])[:, None])
                for (i, j) in grads:
                    gx = (i * xi[:, 0] ** (i - 1) * xi[:, 1] ** j
                          if i else np.zeros(len(w))) / sc.scales[t]
                    gy = (j * xi[:, 0] ** i * xi[:, 1] ** (j - 1)
                          if j else np.zeros(len(w))) / sc.scales[t]
                    Vmat[row] = np.einsum(
                        "k,km->m", w,
                        mono[:, :, 0] * gx[:, None] + mono[:, :, 1] * gy[:, None])
                    row += 1
                for (i, j) in bubbles:
                    m = xi[:, 0] ** i * xi[:, 1] ** j
                    dmx = (i * xi[:, 0] ** (i - 1) * xi[:, 1] ** j
                           if i else np.zeros(len(w))) / sc.scales[t]
                    dmy = (j * xi[:, 0] ** i * xi[:, 1] ** (j - 1)
                           if j else np.zeros(len(w))) / sc.scales[t]
                    wx = bub * dmx + m * dbub[:, 0]
                    wy = bub * dmy + m * dbub[:, 1]
                    # curl of the scalar field (b m): (d/dy, -d/dx)
                    Vmat[row] = np.einsum(
                        "k,km->m", w,
                        mono[:, :, 0] * wy[:, None] - mono[:, :, 1] * wx[:, None])
                    row += 1
            assert row == self.nfl
            try:
                C = np.linalg.inv(Vmat.T)
            except np.linalg.LinAlgError:
                raise InvariantViolation(
                    "flux-space", "dof set not unisolvent on element %d" % t)
            self.flux_coeff[t] = C
            mono, div = self._flux_monomials(t, sc.qpts[t])
            self.flux_q[t] = np.einsum("qmj,bm->qbj", mono, C)
            self.div_q[t] = np.einsum("qm,bm->qb", div, C)
        self._build_matrices()

    def _build_matrices(self):
        """Affine pieces of the mapped wave matrices, per element."""
        mesh = self.mesh
        sc = self.scalar
        ne = mesh.num_elements
        nloc, nfl, np_s = self.nloc, self.nfl, self.np_s
        ai = self.alpha_inv
        self.H0 = np.zeros((ne, nloc, nloc))
        self.Hx = np.zeros((ne, nloc, nloc))
        self.Hy = np.zeros((ne, nloc, nloc))
        self.S_corner = np.zeros((ne, 3, nloc, nloc))
        self.T_grad = np.zeros((ne, 2, nloc, nloc))
        for t in range(ne):
            w = sc.qw[t]
            R = self.flux_q[t]                     # (nq, nfl, 2)
            Dv = self.div_q[t]                     # (nq, nfl)
            Sb = sc.basis_q[t]                     # (nq, np_s)
            aiR = np.einsum("ij,qmj->qmi", ai, R)
            H0 = self.H0[t]
            H0[:nfl, :nfl] = np.einsum("q,qmi,qli->lm", w, aiR, R)
            H0[nfl:, nfl:] = np.einsum("q,qm,ql->lm", w, Sb, Sb)
            for j, Hj in enumerate((self.Hx[t], self.Hy[t])):
                blk = np.einsum("q,ql,qm->lm", w, R[:, :, j], Sb)
                Hj[:nfl, nfl:] = blk
                Hj[nfl:, :nfl] = blk.T
            lam = _barycentric(mesh.vertices[mesh.elements[t]], sc.qpts[t])
            beta = self.beta_damp(sc.qpts[t].T)
            for c in range(3):
                Sc = self.S_corner[t, c]
                wl = w * lam[:, c]
                # flux test row: -delta eta_m div r_l
                Sc[:nfl, nfl:] = -np.einsum("q,qm,ql->lm", wl, Sb, Dv)
                # scalar test row: +delta div r_m eta_l - delta beta eta eta
                Sc[nfl:, :nfl] = np.einsum("q,qm,ql->lm", wl, Dv, Sb)
                Sc[nfl:, nfl:] = -np.einsum("q,qm,ql->lm", wl * beta, Sb, Sb)
            for j in range(2):
                self.T_grad[t, j][nfl:, :nfl] = np.einsum(
                    "q,qm,ql->lm", w, R[:, :, j], Sb)

    # -- tent-level assembly --------------------------------------------------

    def elem_H(self, t, gphi):
        return self.H0[t] + gphi[0] * self.Hx[t] + gphi[1] * self.Hy[t]

    def elem_S(self, t, delta_corners, grad_delta):
        S = np.einsum("c,cab->ab", delta_corners, self.S_corner[t])
        S += grad_delta[0] * self.T_grad[t, 0] + grad_delta[1] * self.T_grad[t, 1]
        return S

    # -- interpolation and evaluation ----------------------------------------

    def interpolate_flux(self, fn):
        """Canonical interpolation of a vector field into the flux dofs."""
        mesh = self.mesh
        p = self.p
        dofs = np.zeros(self.ndof)
        s_e, w_e = edge_rule(p + 3)
        for eid, base in self.edge_offset.items():
            a, b = mesh.edges[eid]
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            pts = pa[None] + s_e[:, None] * (pb - pa)[None]
            tang = pb - pa
            ln = np.hypot(*tang)
            normal = np.array([tang[1], -tang[0]]) / ln
            vals = np.asarray(fn(pts.T))
            vn = vals[0] * normal[0] + vals[1] * normal[1]
            for q in range(self.n_edge):
                leg = _legendre01(q, s_e)
                dofs[base + q] = np.sum(ln * w_e * leg * vn)
        if self.n_int:
            sc = self.scalar
            grads = [(i, j) for tot in range(1, p) for i in range(tot, -1, -1)
                     for j in (tot - i,)]
            bubbles = _monomials_upto(p - 2)
            for t in range(mesh.num_elements):
                pts = sc.qpts[t]
                w = sc.qw[t]
                vals = np.asarray(fn(pts.T))
                xi = (pts - sc.centers[t]) / sc.scales[t]
                lam = _barycentric(mesh.vertices[mesh.elements[t]], pts)
                bub = lam[:, 0] * lam[:, 1] * lam[:, 2]
                dlam = _barycentric_grads(mesh.vertices[mesh.elements[t]])
                dbub = (dlam[0][None] * (lam[:, 1] * lam[:, 2])[:, None]
                        + dlam[1][None] * (lam[:, 0] * lam[:, 2])[:, None]
                        + dlam[2][None] * (lam[:, 0] * lam[:, 1])[:, None])
                base = self.int_offset + t * self.n_int
                k = 0
                for (i, j) in grads:
                    gx = (i * xi[:, 0] ** (i - 1) * xi[:, 1] ** j
                          if i else np.zeros(len(w))) / sc.scales[t]
                    gy = (j * xi[:, 0] ** i * xi[:, 1] ** (j - 1)
                          if j else np.zeros(len(w))) / sc.scales[t]
                    dofs[base + k] = np.sum(w * (vals[0] * gx + vals[1] * gy))
                    k += 1
                for (i, j) in bubbles:
                    m = xi[:, 0] ** i * xi[:, 1] ** j
                    dmx = (i * xi[:, 0] ** (i - 1) * xi[:, 1] ** j
                           if i else np.zeros(len(w))) / sc.scales[t]
                    dmy = (j * xi[:, 0] ** i * xi[:, 1] ** (j - 1)
                           if j else np.zeros(len(w))) / sc.scales[t]
                    wx = bub * dmx + m * dbub[:, 0]
                    wy = bub * dmy + m * dbub[:, 1]
                    dofs[base + k] = np.sum(w * (vals[0] * wy - vals[1] * wx))
                    k += 1
        return dofs

    def project_scalar(self, fn):
        dofs = np.zeros(self.ndof)
        sc = self.scalar
        for t in range(self.mesh.num_elements):
            vals = np.asarray(fn(sc.qpts[t].T)).reshape(-1)
            base = self.scalar_offset + t * self.np_s
            dofs[base:base + self.np_s] = np.einsum(
                "q,qb->b", sc.qw[t] * vals, sc.basis_q[t])
        return dofs

    def local_dofs(self, dofs, t):
        """Element-local dof values (constrained entries read as zero)."""
        idx = self.elem_dofs[t]
        out = np.where(idx >= 0, dofs[np.maximum(idx, 0)], 0.0)
        return out

    def eval_flux(self, dofs, t, pts):
        mono, _ = self._flux_monomials(t, pts)
        vals = np.einsum("qmj,bm->qbj", mono, self.flux_coeff[t])
        loc = self.local_dofs(dofs, t)[:self.nfl]
        return np.einsum("b,qbj->qj", loc, vals)

    def eval_scalar(self, dofs, t, pts):
        psi = self.scalar.eval_basis(t, pts)
        base = self.scalar_offset + t * self.np_s
        return psi @ dofs[base:base + self.np_s]

    def eval_flux_local(self, local, t, pts):
        mono, _ = self._flux_monomials(t, pts)
        vals = np.einsum("qmj,bm->qbj", mono, self.flux_coeff[t])
        return np.einsum("b,qbj->qj", local[:self.nfl], vals)

    def eval_scalar_local(self, local, t, pts):
        psi = self.scalar.eval_basis(t, pts)
        return psi @ local[self.nfl:]

    def error_norm_broken(self, front, exact_q, exact_mu, degree_boost=2):
        """L2 error of an elementwise-stored (ne, nloc) front."""
        bary, w = triangle_rule(2 * self.p + 2 + degree_boost)
        mesh = self.mesh
        tri = mesh.vertices[mesh.elements]
        total = 0.0
        for t in range(mesh.num_elements):
            pts = bary @ tri[t]
            qh = self.eval_flux_local(front[t], t, pts)
            muh = self.eval_scalar_local(front[t], t, pts)
            qex = np.asarray(exact_q(pts.T)).T
            muex = np.asarray(exact_mu(pts.T)).reshape(-1)
            total += mesh.areas[t] * np.sum(
                w * (np.sum((qh - qex) ** 2, axis=1) + (muh - muex) ** 2))
        return np.sqrt(total)

    def error_norm(self, dofs, exact_q, exact_mu, degree_boost=2):
        """Squared-sum L2 error of (flux, scalar) against exact fields."""
        bary, w = triangle_rule(2 * self.p + 2 + degree_boost)
        mesh = self.mesh
        tri = mesh.vertices[mesh.elements]
        total = 0.0
        for t in range(mesh.num_elements):
            pts = bary @ tri[t]
            qh = self.eval_flux(dofs, t, pts)
            muh = self.eval_scalar(dofs, t, pts)
            qex = np.asarray(exact_q(pts.T)).T
            muex = np.asarray(exact_mu(pts.T)).reshape(-1)
            total += mesh.areas[t] * np.sum(
                w * (np.sum((qh - qex) ** 2, axis=1) + (muh - muex) ** 2))
        return np.sqrt(total)


def _monomials_upto(p):
    if p < 0:
        return []
    return [(i, j) for tot in range(p + 1) for i in range(tot, -1, -1)
            for j in (tot - i,)]


def _barycentric(tri, pts):
    T = np.array([tri[1] - tri[0], tri[2] - tri[0]]).T
    sol = np.linalg.solve(T, (pts - tri[0]).T)
    lam = np.empty((pts.shape[0], 3))
    lam[:, 1] = sol[0]
    lam[:, 2] = sol[1]
    lam[:, 0] = 1.0 - sol[0] - sol[1]
    return lam


def _barycentric_grads(tri):
    T = np.array([tri[1] - tri[0], tri[2] - tri[0]]).T
    Tinv = np.linalg.inv(T)
    g1, g2 = Tinv[0], Tinv[1]
    return [-g1 - g2, g1, g2]


def wave_exact_standing(x, t):
    """Classical standing wave on the unit square (alpha = 1, beta = 0):
    returns (q (2,n), mu (n,)) for positions x (2,n) at time t."""
    x = np.asarray(x, dtype=float)
    st = np.sin(np.pi * t * np.sqrt(2.0)) / np.sqrt(2.0)
    ct = np.cos(np.pi * t * np.sqrt(2.0))
    q = np.stack([
        -np.sin(np.pi * x[0]) * np.cos(np.pi * x[1]) * st,
        -np.cos(np.pi * x[0]) * np.sin(np.pi * x[1]) * st,
    ])
    mu = np.cos(np.pi * x[0]) * np.cos(np.pi * x[1]) * ct
    return q, mu
