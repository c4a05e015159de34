"""Hyperbolic systems: temporal term g, flux f, source b, wavespeeds,
entropy pairs, and the inverse of the mapped state relation.

On a cylinder the conserved variable is U = g(u) - f(u) . grad phi; each
law supplies the inverse of that algebraic relation (`ginv`) so explicit
schemes can recover the physical state.  State arrays are (L, n) with
components first, matching x arrays of shape (2, n).

Units: states and coordinates are dimensionless; wavespeeds are
length/time in domain units.
"""

import numpy as np

from .errors import CausalityViolation, NonPhysicalState

__all__ = [
    "ConservationLaw", "TransportLaw", "BurgersLaw", "WaveLaw", "EulerLaw",
    "transport_law", "burgers_law", "wave_law", "euler_law",
    "burgers_ginv", "euler_flux", "euler_ginv", "euler_entropy",
    "euler_wavespeed", "euler_temperature", "euler_pressure", "wave_H",
    "entropy_pair_burgers", "mapped_entropy_pair", "law_by_name",
]


class ConservationLaw:
    """Base interface; subclasses fill in the physics.

    The temporal derivative matrix D_u g must be invertible at every
    queried state (hyperbolicity in the time direction).
    """

    L = 1
    name = "abstract"
    has_entropy = False
    zero_source = True

    def flux(self, x, t, u):
        raise NotImplementedError

    def advective_velocity(self, u):
        """Velocity used for upwind decisions in the entropy flux."""
        raise NotImplementedError

    def temporal(self, x, t, u):
        raise NotImplementedError

    def source(self, x, t, u):
        return np.zeros_like(self.temporal(x, t, u))

    def dg_du(self, x, t, u):
        raise NotImplementedError

    def flux_jacobian(self, x, t, u):
        """(L, L, 2, n) array J[l, m, j] = d f_{lj} / d u_m."""
        raise NotImplementedError

    def max_wavespeed(self, x, t, u):
        raise NotImplementedError

    def normal_wavespeed(self, x, t, u, n):
        raise NotImplementedError

    def viscosity_speed(self, x, t, u):
        """Speed scale for the wavespeed viscosity limiter."""
        return self.max_wavespeed(x, t, u)

    def mapped(self, u, gphi, x=0.0, t=0.0):
        """U = g(u) - f(u) . grad phi."""
        f = self.flux(x, t, u)
        return self.temporal(x, t, u) - np.einsum("lj...,j...->l...", f, gphi)

    def mapped_jacobian(self, x, t, u, gphi):
        """D_u of the mapped relation: D_u g - sum_j gphi_j D_u f_(.j)."""
        J = self.flux_jacobian(x, t, u)
        return self.dg_du(x, t, u) - np.einsum("lmj...,j...->lm...", J, gphi)

    def ginv(self, U, gphi, x=0.0, t=0.0):
        raise NotImplementedError

    # entropy machinery (only for laws with has_entropy)
    def entropy(self, u):
        raise NotImplementedError

    def entropy_flux(self, u):
        raise NotImplementedError

    def entropy_grad(self, u):
        raise NotImplementedError

    def entropy_flux_grad(self, u):
        raise NotImplementedError


# -- scalar transport ---------------------------------------------------------


class TransportLaw(ConservationLaw):
    """Advection of a scalar density along a divergence-free field beta.

    The caller is responsible for div beta = 0; a constant vector always
    qualifies.
    """

    L = 1
    name = "transport"
    has_entropy = True

    def __init__(self, beta=(1.0, 0.0)):
        if callable(beta):
            self._beta_fn = beta
            self._beta_const = None
            self.has_entropy = False   # entropy pair kept for constant beta
        else:
            self._beta_const = np.asarray(beta, dtype=float).reshape(2)
            self._beta_fn = None

    def _beta(self, x):
        if self._beta_fn is not None:
            return np.asarray(self._beta_fn(x), dtype=float)
        shape = (2,) + (np.shape(x)[1:] if np.ndim(x) > 1 else ())
        return np.broadcast_to(
            self._beta_const.reshape((2,) + (1,) * (len(shape) - 1)), shape)

    def flux(self, x, t, u):
        b = self._beta(x)
        out = np.empty((1, 2) + np.shape(u)[1:])
        out[0, 0] = b[0] * u[0]
        out[0, 1] = b[1] * u[0]
        return out

    def temporal(self, x, t, u):
        return np.array(u, copy=True)

    def dg_du(self, x, t, u):
        return np.ones((1, 1) + np.shape(u)[1:])

    def flux_jacobian(self, x, t, u):
        b = self._beta(x)
        out = np.empty((1, 1, 2) + np.shape(u)[1:])
        out[0, 0, 0] = b[0] * np.ones(np.shape(u)[1:])
        out[0, 0, 1] = b[1] * np.ones(np.shape(u)[1:])
        return out

    def max_wavespeed(self, x, t, u):
        b = self._beta(x)
        return np.sqrt(b[0] ** 2 + b[1] ** 2)

    def normal_wavespeed(self, x, t, u, n):
        b = self._beta(x)
        return np.abs(b[0] * n[0] + b[1] * n[1])

    def ginv(self, U, gphi, x=0.0, t=0.0):
        b = self._beta(x)
        denom = 1.0 - (b[0] * gphi[0] + b[1] * gphi[1])
        if np.any(np.abs(denom) < 1e-12):
            raise CausalityViolation("transport: 1 - beta.grad(phi) vanishes")
        return U / denom

    def entropy(self, u):
        return 0.5 * u[0] ** 2

    def entropy_flux(self, u):
        # square entropy rides along beta (needs constant beta)
        b = self._beta_const
        out = np.empty((2,) + np.shape(u)[1:])
        out[0] = 0.5 * b[0] * u[0] ** 2
        out[1] = 0.5 * b[1] * u[0] ** 2
        return out

    def entropy_grad(self, u):
        return np.array(u, copy=True)

    def entropy_flux_grad(self, u):
        b = self._beta_const
        out = np.empty((2, 1) + np.shape(u)[1:])
        out[0, 0] = b[0] * u[0]
        out[1, 0] = b[1] * u[0]
        return out

    def advective_velocity(self, u):
        b = self._beta_const
        out = np.empty((2,) + np.shape(u)[1:])
        out[0] = b[0]
        out[1] = b[1]
        return out


# -- 2D Burgers ---------------------------------------------------------------


def burgers_ginv(U, d):
    """Inverse of U = u - 0.5 u^2 d with d the sum of the two grad-phi
    components; picks the root on the causal branch |u d| < 1."""
    U = np.asarray(U, dtype=float)
    d = np.asarray(d, dtype=float)
    disc = 1.0 - 2.0 * d * U
    if np.any(disc < 0.0):
        raise CausalityViolation("burgers: negative discriminant 1 - 2 d U")
    u = 2.0 * U / (1.0 + np.sqrt(disc))
    if np.any(np.abs(u * d) >= 1.0):
        raise CausalityViolation("burgers: |u d| >= 1")
    return u


class BurgersLaw(ConservationLaw):
    """Scalar 2D conservation law with flux 0.5 u^2 (1, 1)."""

    L = 1
    name = "burgers"
    has_entropy = True

    def flux(self, x, t, u):
        half = 0.5 * u[0] ** 2
        out = np.empty((1, 2) + np.shape(u)[1:])
        out[0, 0] = half
        out[0, 1] = half
        return out

    def temporal(self, x, t, u):
        return np.array(u, copy=True)

    def dg_du(self, x, t, u):
        return np.ones((1, 1) + np.shape(u)[1:])

    def flux_jacobian(self, x, t, u):
        out = np.empty((1, 1, 2) + np.shape(u)[1:])
        out[0, 0, 0] = u[0]
        out[0, 0, 1] = u[0]
        return out

    def max_wavespeed(self, x, t, u):
        return np.sqrt(2.0) * np.abs(u[0])

    def normal_wavespeed(self, x, t, u, n):
        return np.abs(u[0] * (n[0] + n[1]))

    def ginv(self, U, gphi, x=0.0, t=0.0):
        return burgers_ginv(U[0], gphi[0] + gphi[1])[None]

    def entropy(self, u):
        return 0.5 * u[0] ** 2

    def entropy_flux(self, u):
        third = u[0] ** 3 / 3.0
        out = np.empty((2,) + np.shape(u)[1:])
        out[0] = third
        out[1] = third
        return out

    def entropy_grad(self, u):
        return np.array(u, copy=True)

    def entropy_flux_grad(self, u):
        sq = u[0] ** 2
        out = np.empty((2, 1) + np.shape(u)[1:])
        out[0, 0] = sq
        out[1, 0] = sq
        return out

    def advective_velocity(self, u):
        out = np.empty((2,) + np.shape(u)[1:])
        out[0] = u[0]
        out[1] = u[0]
        return out


def entropy_pair_burgers(u):
    """(u^2/2, (u^3/3, u^3/3)): the square entropy for the (1,1) flux."""
    u = np.asarray(u, dtype=float)
    return 0.5 * u ** 2, np.stack([u ** 3 / 3.0, u ** 3 / 3.0])


# -- acoustic wave system -----------------------------------------------------


class WaveLaw(ConservationLaw):
    """First-order acoustic system for u = (q, mu) with material alpha
    (SPD 2x2) and damping beta_damp:

        d/dt (alpha^-1 q) - grad mu            = 0
        d/dt mu           - div q + beta_damp mu = 0
    """

    L = 3
    name = "wave"
    has_entropy = False
    zero_source = False

    def __init__(self, alpha=None, beta_damp=0.0):
        if alpha is None:
            alpha = np.eye(2)
        self.alpha = np.asarray(alpha, dtype=float)
        if self.alpha.shape != (2, 2) or not np.allclose(
                self.alpha, self.alpha.T):
            raise ValueError("alpha must be a symmetric 2x2 matrix")
        w = np.linalg.eigvalsh(self.alpha)
        if w.min() <= 0:
            raise ValueError("alpha must be positive definite")
        self.alpha_inv = np.linalg.inv(self.alpha)
        self._speed = float(np.sqrt(w.max()))
        self.beta_damp = beta_damp if callable(beta_damp) else (
            lambda x, b=float(beta_damp): b * np.ones(np.shape(x)[1:]))

    def flux(self, x, t, u):
        out = np.zeros((3, 2) + np.shape(u)[1:])
        out[0, 0] = -u[2]
        out[1, 1] = -u[2]
        out[2, 0] = -u[0]
        out[2, 1] = -u[1]
        return out

    def temporal(self, x, t, u):
        out = np.empty_like(np.asarray(u, dtype=float))
        ai = self.alpha_inv
        out[0] = ai[0, 0] * u[0] + ai[0, 1] * u[1]
        out[1] = ai[1, 0] * u[0] + ai[1, 1] * u[1]
        out[2] = u[2]
        return out

    def source(self, x, t, u):
        out = np.zeros_like(np.asarray(u, dtype=float))
        out[2] = self.beta_damp(x) * u[2]
        return out

    def dg_du(self, x, t, u):
        At = np.zeros((3, 3))
        At[:2, :2] = self.alpha_inv
        At[2, 2] = 1.0
        return At.reshape(3, 3, *([1] * (np.ndim(u) - 1)))

    def flux_jacobian(self, x, t, u):
        J = np.zeros((3, 3, 2))
        J[0, 2, 0] = -1.0
        J[1, 2, 1] = -1.0
        J[2, 0, 0] = -1.0
        J[2, 1, 1] = -1.0
        return J.reshape(3, 3, 2, *([1] * (np.ndim(u) - 1)))

    def max_wavespeed(self, x, t, u):
        return self._speed

    def normal_wavespeed(self, x, t, u, n):
        nn = np.asarray(n)
        s = np.sqrt(np.einsum("i...,ij,j...->...", nn, self.alpha, nn))
        return s

    def mapped_matrix(self, gphi):
        """H with H u = U: [[alpha^-1, gphi], [gphi^T, 1]], SPD whenever
        |alpha^(1/2) grad phi| < 1.  gphi may be (2,) or (2, n)."""
        gphi = np.asarray(gphi, dtype=float)
        H = np.zeros((3, 3) + gphi.shape[1:])
        H[0, 0], H[0, 1] = self.alpha_inv[0, 0], self.alpha_inv[0, 1]
        H[1, 0], H[1, 1] = self.alpha_inv[1, 0], self.alpha_inv[1, 1]
        H[2, 2] = 1.0
        H[0, 2] = H[2, 0] = gphi[0]
        H[1, 2] = H[2, 1] = gphi[1]
        return H

    def ginv(self, U, gphi, x=0.0, t=0.0):
        U = np.asarray(U, dtype=float)
        gphi = np.asarray(gphi, dtype=float)
        if gphi.ndim == 1:
            gphi = np.broadcast_to(
                gphi.reshape((2,) + (1,) * (U.ndim - 1)), (2,) + U.shape[1:])
        H = self.mapped_matrix(gphi)
        Hm = np.moveaxis(H.reshape(3, 3, -1), -1, 0)
        rhs = np.moveaxis(U.reshape(3, -1), -1, 0)[:, :, None]
        sol = np.linalg.solve(Hm, rhs)[:, :, 0]
        return np.moveaxis(sol, 0, -1).reshape(U.shape)


def wave_H(law, tent_map, elem, that):
    """Mapped 3x3 state matrix on a patch element at cylinder time that."""
    return law.mapped_matrix(tent_map.grad_phi(that)[elem])


# -- compressible Euler -------------------------------------------------------

_D_GAS = 5  # degrees of freedom of the gas particles (ideal diatomic)


def euler_temperature(u, d=_D_GAS):
    rho, m1, m2, E = u[0], u[1], u[2], u[3]
    return (4.0 / d) * (E / rho - 0.5 * (m1 ** 2 + m2 ** 2) / rho ** 2)


def euler_pressure(u, d=_D_GAS):
    return 0.5 * u[0] * euler_temperature(u, d)


def _check_physical(u, d=_D_GAS, where="euler"):
    rho = u[0]
    if np.any(~np.isfinite(np.asarray(u))):
        raise NonPhysicalState("%s: non-finite state" % where)
    if np.any(rho <= 0.0):
        raise NonPhysicalState("%s: nonpositive density" % where)
    T = euler_temperature(u, d)
    if np.any(T <= 0.0):
        raise NonPhysicalState("%s: nonpositive temperature" % where)
    return T


def euler_flux(u, d=_D_GAS):
    """Flux rows (m; P I + m x m / rho; (E+P) m / rho), P = rho T / 2."""
    u = np.asarray(u, dtype=float)
    T = _check_physical(u, d, "euler_flux")
    rho, m1, m2, E = u[0], u[1], u[2], u[3]
    P = 0.5 * rho * T
    v1, v2 = m1 / rho, m2 / rho
    out = np.empty((4, 2) + np.shape(rho))
    out[0, 0], out[0, 1] = m1, m2
    out[1, 0], out[1, 1] = P + m1 * v1, m1 * v2
    out[2, 0], out[2, 1] = m2 * v1, P + m2 * v2
    out[3, 0], out[3, 1] = (E + P) * v1, (E + P) * v2
    return out


def euler_wavespeed(u, d=_D_GAS):
    """|m|/rho + sqrt(gamma T), the speed scale of the viscosity limiter."""
    u = np.asarray(u, dtype=float)
    T = _check_physical(u, d, "euler_wavespeed")
    gamma = (d + 2.0) / d
    return np.hypot(u[1], u[2]) / u[0] + np.sqrt(gamma * T)


def euler_entropy(u, d=_D_GAS):
    """(rho (ln rho - d/2 ln T), m * entropy / rho)."""
    u = np.asarray(u, dtype=float)
    T = _check_physical(u, d, "euler_entropy")
    rho = u[0]
    ent = rho * (np.log(rho) - 0.5 * d * np.log(T))
    return ent, np.stack([u[1] / rho * ent, u[2] / rho * ent])


def euler_ginv(U, gphi, d=_D_GAS):
    """Closed-form inverse of the mapped Euler relation.

    With U = (R, M, F) and p = grad phi:
      a1 = R - M.p,  a2 = 2 F R - |M|^2,
      a3 = a2 / (a1 + sqrt(a1^2 - 4 (d+1)/d^2 |p|^2 a2)),
      rho = R^2 / (a1 - 2/d |p|^2 a3),
      m   = rho/R (M + 2/d a3 p),
      E   = rho/R (F + 2 a3/(d rho) p.m).
    """
    U = np.asarray(U, dtype=float)
    gphi = np.asarray(gphi, dtype=float)
    R, M1, M2, F = U[0], U[1], U[2], U[3]
    p1, p2 = gphi[0], gphi[1]
    if np.any(R <= 0.0):
        raise CausalityViolation("euler: mapped density R <= 0")
    psq = p1 ** 2 + p2 ** 2
    if np.all(psq == 0.0):
        # flat tent: the relation is the identity, keep it bit-exact
        u = np.broadcast_to(U, U.shape).copy()
        _check_physical(u, d, "euler_ginv")
        return u
    a1 = R - (M1 * p1 + M2 * p2)
    if np.any(a1 <= 0.0):
        raise CausalityViolation("euler: a1 <= 0")
    a2 = 2.0 * F * R - (M1 ** 2 + M2 ** 2)
    rad = a1 ** 2 - (4.0 * (d + 1.0) / d ** 2) * psq * a2
    if np.any(rad < 0.0):
        raise CausalityViolation("euler: negative radicand")
    a3 = a2 / (a1 + np.sqrt(rad))
    rho = R ** 2 / (a1 - (2.0 / d) * psq * a3)
    m1 = rho / R * (M1 + (2.0 / d) * a3 * p1)
    m2 = rho / R * (M2 + (2.0 / d) * a3 * p2)
    E = rho / R * (F + (2.0 / d) * a3 / rho * (p1 * m1 + p2 * m2))
    u = np.stack([rho, m1, m2, E])
    _check_physical(u, d, "euler_ginv")
    return u


class EulerLaw(ConservationLaw):
    """2D compressible Euler for a perfect gas, P = rho T / 2 and
    T = (4/d)(E/rho - |m|^2/(2 rho^2)) with d = 5 (gamma = 1.4)."""

    L = 4
    name = "euler"
    has_entropy = True

    def __init__(self, d=_D_GAS):
        self.d = d
        self.gamma = (d + 2.0) / d

    def flux(self, x, t, u):
        return euler_flux(u, self.d)

    def temporal(self, x, t, u):
        return np.array(u, copy=True)

    def dg_du(self, x, t, u):
        eye = np.eye(4).reshape(4, 4, *([1] * (np.ndim(u) - 1)))
        return np.broadcast_to(eye, (4, 4) + np.shape(u)[1:]).copy()

    def flux_jacobian(self, x, t, u):
        g1 = self.gamma - 1.0
        rho, m1, m2, E = u[0], u[1], u[2], u[3]
        v = np.stack([m1 / rho, m2 / rho])
        q2 = v[0] ** 2 + v[1] ** 2
        P = euler_pressure(u, self.d)
        Hent = (E + P) / rho
        J = np.zeros((4, 4, 2) + np.shape(rho))
        for j in range(2):
            # mass row
            J[0, 1 + j, j] = 1.0
            # momentum rows
            for k in range(2):
                J[1 + k, 0, j] = -v[j] * v[k] + (1.0 if k == j else 0.0) * g1 * q2 / 2
                for i in range(2):
                    J[1 + k, 1 + i, j] = ((1.0 if i == j else 0.0) * v[k]
                                          + (1.0 if i == k else 0.0) * v[j]
                                          - (1.0 if k == j else 0.0) * g1 * v[i])
                J[1 + k, 3, j] = (1.0 if k == j else 0.0) * g1
            # energy row
            J[3, 0, j] = v[j] * (g1 * q2 / 2 - Hent)
            for i in range(2):
                J[3, 1 + i, j] = (1.0 if i == j else 0.0) * Hent - g1 * v[i] * v[j]
            J[3, 3, j] = self.gamma * v[j]
        return J

    def max_wavespeed(self, x, t, u):
        return euler_wavespeed(u, self.d)

    def normal_wavespeed(self, x, t, u, n):
        T = _check_physical(u, self.d)
        vn = (u[1] * n[0] + u[2] * n[1]) / u[0]
        return np.abs(vn) + np.sqrt(self.gamma * T)

    def viscosity_speed(self, x, t, u):
        return u[0] * euler_wavespeed(u, self.d)

    def ginv(self, U, gphi, x=0.0, t=0.0):
        return euler_ginv(U, gphi, self.d)

    def entropy(self, u):
        return euler_entropy(u, self.d)[0]

    def entropy_flux(self, u):
        return euler_entropy(u, self.d)[1]

    def entropy_grad(self, u):
        d = self.d
        rho, m1, m2, E = u[0], u[1], u[2], u[3]
        T = euler_temperature(u, d)
        s = np.log(rho) - 0.5 * d * np.log(T)
        dT_drho = (4.0 / d) * (-E / rho ** 2 + (m1 ** 2 + m2 ** 2) / rho ** 3)
        out = np.empty_like(np.asarray(u, dtype=float))
        out[0] = s + 1.0 - 0.5 * d * rho * dT_drho / T
        out[1] = 2.0 * m1 / (rho * T)
        out[2] = 2.0 * m2 / (rho * T)
        out[3] = -2.0 / T
        return out

    def advective_velocity(self, u):
        return np.stack([u[1], u[2]])

    def entropy_flux_grad(self, u):
        rho = u[0]
        ent = self.entropy(u)
        dent = self.entropy_grad(u)
        v = np.stack([u[1] / rho, u[2] / rho])
        out = np.empty((2, 4) + np.shape(rho))
        for j in range(2):
            out[j, 0] = -v[j] / rho * ent + v[j] * dent[0]
            for i in range(2):
                out[j, 1 + i] = (1.0 if i == j else 0.0) * ent / rho \
                    + v[j] * dent[1 + i]
            out[j, 3] = v[j] * dent[3]
        return out


# -- mapped entropy pair and registry ----------------------------------------


def mapped_entropy_pair(law, gphi, delta, w):
    """Entropy pair of the mapped system:
    (E(w) - F(w) . grad phi, delta * F(w))."""
    ent = law.entropy(w)
    flux = law.entropy_flux(w)
    gphi = np.asarray(gphi, dtype=float)
    if gphi.ndim == 1:
        gphi = gphi.reshape((2,) + (1,) * np.ndim(ent))
    ent_hat = ent - (flux[0] * gphi[0] + flux[1] * gphi[1])
    return ent_hat, delta * flux


def transport_law(beta=(1.0, 0.0)):
    return TransportLaw(beta)


def burgers_law():
    return BurgersLaw()


def wave_law(alpha=None, beta_damp=0.0):
    return WaveLaw(alpha, beta_damp)


def euler_law():
    return EulerLaw()


def law_by_name(name, **kwargs):
    table = {"transport": transport_law, "burgers": burgers_law,
             "wave": wave_law, "euler": euler_law}
    if name not in table:
        raise ValueError("unknown law %r (expected one of %s)"
                         % (name, sorted(table)))
    return table[name](**kwargs)
