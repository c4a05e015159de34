"""Time integration on the mapped cylinder.

The locally implicit path solves (H(that) u)' = S u with an s-stage
Radau IIA collocation scheme: substituting y_l = H_l u_l into the stage
relations gives one coupled linear system for all stages.  The explicit
path advances M U' = R1(U) with a two-stage SSP scheme (or plain Euler)
and applies the entropy-viscosity operator in fractional steps.
"""

import math

import numpy as np
from scipy.special import roots_jacobi

from .dg import (
    dg_rhs,
    entropy_residual,
    flux_rusanov,
    interior_penalty_matrix,
    viscosity_coefficient,
)
from .errors import NonFiniteState, SingularStageMatrix

__all__ = ["ButcherTableau", "radau_iia", "implicit_tent_advance",
           "explicit_tent_advance", "substep_count", "TentDiagnostics"]


class ButcherTableau:
    """Implicit Runge-Kutta coefficients with c[-1] = 1 (stiffly accurate:
    the last stage value is the step result)."""

    def __init__(self, a, c):
        self.a = np.asarray(a, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.s = len(self.c)
        if self.a.shape != (self.s, self.s):
            raise ValueError("a must be s x s")
        if abs(self.c[-1] - 1.0) > 1e-14:
            raise ValueError("final abscissa must be 1")


def radau_iia(s):
    """Radau IIA collocation tableau with s stages (order 2s-1).

    Abscissae: roots of the (1,0) Jacobi polynomial of degree s-1 mapped
    to (0,1), plus the right endpoint; weights from the collocation
    conditions sum_m a_lm c_m^(k-1) = c_l^k / k.
    """
    if not 1 <= s <= 5:
        raise ValueError("stage count must be in [1, 5]")
    if s == 1:
        return ButcherTableau([[1.0]], [1.0])
    if s == 2:
        return ButcherTableau([[5.0 / 12.0, -1.0 / 12.0],
                               [3.0 / 4.0, 1.0 / 4.0]], [1.0 / 3.0, 1.0])
    nodes, _ = roots_jacobi(s - 1, 1.0, 0.0)
    c = np.concatenate([0.5 * (nodes + 1.0), [1.0]])
    V = np.vander(c, increasing=True).T          # V[k, m] = c_m^k
    a = np.empty((s, s))
    for l in range(s):
        rhs = np.array([c[l] ** k / k for k in range(1, s + 1)])
        a[l] = np.linalg.solve(V[:s], rhs)
    return ButcherTableau(a, c)


def implicit_tent_advance(H, S, u0, tableau):
    """Advance (H(t) u)' = S u over t in (0,1); returns the final stage.

    H is a callable t -> matrix (or scalar); the coupled stage system
        H_l u_l - sum_m a_lm S u_m = H_0 u_0
    is solved by dense factorization.
    """
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    P = u0.size
    S = np.asarray(S, dtype=float).reshape(P, P)
    s = tableau.s

    def Hmat(t):
        return np.asarray(H(t), dtype=float).reshape(P, P)

    big = np.zeros((s * P, s * P))
    for l in range(s):
        big[l * P:(l + 1) * P, l * P:(l + 1) * P] = Hmat(tableau.c[l])
        for m in range(s):
            big[l * P:(l + 1) * P, m * P:(m + 1) * P] -= tableau.a[l, m] * S
    rhs = np.tile(Hmat(0.0) @ u0, s)
    try:
        sol = np.linalg.solve(big, rhs)
    except np.linalg.LinAlgError:
        raise SingularStageMatrix("stage system is singular")
    return sol[(s - 1) * P:]


def substep_count(p, safety=2.0):
    """Explicit substeps per tent: stability needs O(p^2) of them."""
    return max(1, math.ceil(safety * (p + 1) ** 2))


class TentDiagnostics:
    """Per-tent record: viscosity coefficient, substep counts, causality
    margin (filled by the driver)."""

    __slots__ = ("nu_max", "outer_steps", "visc_substeps")

    def __init__(self):
        self.nu_max = 0.0
        self.outer_steps = 0
        self.visc_substeps = 0


def explicit_tent_advance(ctx, tmap, law, U0, m, visc, flux=flux_rusanov,
                          bc=None, method="ssp2", diag=None):
    """March the mapped DG system over the tent cylinder.

    m outer steps of size 1/m; each runs the hyperbolic update (two-stage
    SSP by default, plain Euler optionally), then sizes the entropy
    viscosity from the pre-update state and applies the penalty operator
    with explicit Euler fractional steps covering the same interval.
    """
    if m < 1:
        raise ValueError("need at least one substep")
    U = np.array(U0, dtype=float)
    dt = 1.0 / m
    p_eff = max(ctx.space.p, 1)
    pen = None
    h_min = float(ctx.diams.min())
    delta_star = tmap.delta_max
    nT, nb = ctx.nT, ctx.space.nb
    L = law.L
    for j in range(m):
        t0 = j * dt
        R1 = dg_rhs(ctx, tmap, law, U, t0, flux=flux, bc=bc)
        if method == "ssp2":
            U1 = U + dt * R1
            R1b = dg_rhs(ctx, tmap, law, U1, t0 + dt, flux=flux, bc=bc)
            Unew = 0.5 * (U + U1 + dt * R1b)
        elif method == "euler":
            Unew = U + dt * R1
        else:
            raise ValueError("unknown method %r" % method)
        nu = 0.0
        if law.has_entropy and visc is not None:
            res = entropy_residual(ctx, tmap, law, U, R1, t0, flux=flux,
                                   bc=bc)
            nu, _, _ = viscosity_coefficient(ctx, tmap, law, U, res, visc, t0)
        if nu > 0.0:
            if pen is None:
                pen = interior_penalty_matrix(ctx, tmap, visc.penalty_alpha)
            stiffness = delta_star * nu * p_eff ** 4 / h_min ** 2
            dt_v = dt / stiffness if stiffness > 0 else dt
            nsub = max(1, math.ceil(dt / (visc.substep_safety * dt_v)))
            dt_sub = dt / nsub
            t1 = t0 + dt
            gphi = tmap.grad_phi(t1)
            gphi_q = np.repeat(gphi.T[:, :, None], ctx.space.nq,
                               axis=2).reshape(2, -1)
            x_q = ctx.qpts.reshape(-1, 2).T
            t_q = ctx.phi_volume(tmap, t1).reshape(-1)
            for _ in range(nsub):
                Uq = np.einsum("elb,eqb->leq", Unew, ctx.basis).reshape(L, -1)
                u_q = law.ginv(Uq, gphi_q, x_q, t_q).reshape(L, nT, -1)
                proj = np.einsum("eq,leq,eqb->elb", ctx.qw, u_q, ctx.basis)
                flat = proj.transpose(1, 0, 2).reshape(L, -1)
                Unew -= dt_sub * nu * (flat @ pen).reshape(
                    L, nT, nb).transpose(1, 0, 2)
            if diag is not None:
                diag.visc_substeps += nsub
        if diag is not None:
            diag.nu_max = max(diag.nu_max, nu)
            diag.outer_steps += 1
        if not np.all(np.isfinite(Unew)):
            raise NonFiniteState(
                "explicit advance diverged at outer step %d (patch center %d)"
                % (j, ctx.patch.center))
        U = Unew
    return U
