"""Tent-to-cylinder mapping data and verification helpers.

A tent over a vertex patch maps one-to-one onto patch x (0,1) through
(x, phi(x, that)) with phi = (1-that)*tau_bot + that*tau_top.  Per patch
element, tau_bot and tau_top are affine, so grad phi is constant in x,
affine in that, and the Jacobian determinant equals
delta = tau_top - tau_bot.
"""

import numpy as np

from .errors import InvariantViolation

__all__ = ["TentMap", "build_tent_map", "PolyField", "piola_identity_check",
           "mapped_data"]


class TentMap:
    """Geometry of the map from a cylinder onto one tent.

    Arrays are ordered like `patch.elements` / `patch.vertices`:
      grad_bot, grad_top   (ne, 2)  elementwise gradients of the two fronts
      delta_vertex         (nv,)    pole profile tau_top - tau_bot
      elem_vertices        (ne, 3)  patch-local vertex index per element corner
    """

    def __init__(self, patch, tau_bot, tau_top):
        mesh = patch.mesh
        self.patch = patch
        self.tau_bot = np.asarray(tau_bot, dtype=float)
        self.tau_top = np.asarray(tau_top, dtype=float)
        self.delta_vertex = self.tau_top - self.tau_bot
        if np.any(self.delta_vertex < -1e-14):
            raise InvariantViolation("tent", "tau_top < tau_bot on the patch")
        ne = len(patch.elements)
        self.elem_vertices = np.empty((ne, 3), dtype=np.int64)
        self.grad_lambda = np.empty((ne, 3, 2))
        for i, t in enumerate(patch.elements):
            tri = mesh.elements[t]
            self.elem_vertices[i] = [patch.local_index[int(v)] for v in tri]
            self.grad_lambda[i] = _barycentric_gradients(mesh.vertices[tri])
        tb = self.tau_bot[self.elem_vertices]          # (ne, 3)
        tt = self.tau_top[self.elem_vertices]
        self.grad_bot = np.einsum("ev,evj->ej", tb, self.grad_lambda)
        self.grad_top = np.einsum("ev,evj->ej", tt, self.grad_lambda)
        self.delta_elem = tt - tb                      # vertex values per element

    def grad_phi(self, that):
        """(ne, 2) spatial gradient of phi at cylinder time `that`."""
        return (1.0 - that) * self.grad_bot + that * self.grad_top

    def delta_at(self, elem, bary):
        """delta at barycentric points (n, 3) of patch element `elem`."""
        return np.asarray(bary) @ self.delta_elem[elem]

    def phi_at(self, elem, bary, that):
        """Physical time of mapped points of patch element `elem`."""
        tb = np.asarray(bary) @ self.tau_bot[self.elem_vertices[elem]]
        tt = np.asarray(bary) @ self.tau_top[self.elem_vertices[elem]]
        return (1.0 - that) * tb + that * tt

    @property
    def delta_max(self):
        return float(self.delta_vertex.max())


def _barycentric_gradients(tri):
    # rows i: grad of the hat function of vertex i on the triangle
    p0, p1, p2 = tri
    J = np.array([p1 - p0, p2 - p0]).T
    Jinv = np.linalg.inv(J)
    g = np.empty((3, 2))
    g[1] = Jinv[0]
    g[2] = Jinv[1]
    g[0] = -g[1] - g[2]
    return g


def build_tent_map(tent, mesh=None):
    """Mapping data for a pitched tent (tau pairs in patch-local order)."""
    tmap = TentMap(tent.patch, tent.tau_bot, tent.tau_top)
    if tmap.delta_vertex[0] <= 0.0:
        raise InvariantViolation("tent", "pole height must be positive")
    return tmap


# -- polynomial spacetime fields ---------------------------------------------


class PolyField:
    """Vector field on spacetime (x1, x2, t) with polynomial components.

    Each component is a dict {(i, j, k): coeff} for x1^i x2^j t^k.
    Evaluation accepts complex arguments, which the Piola check uses for
    complex-step differentiation (exact for polynomials).
    """

    def __init__(self, components):
        self.components = [dict(c) for c in components]

    @classmethod
    def random(cls, degree, rng, ncomp=3, scale=1.0):
        comps = []
        for _ in range(ncomp):
            c = {}
            for i in range(degree + 1):
                for j in range(degree + 1 - i):
                    for k in range(degree + 1 - i - j):
                        c[(i, j, k)] = scale * rng.uniform(-1.0, 1.0)
            comps.append(c)
        return cls(comps)

    def eval(self, comp, x1, x2, t):
        out = 0.0 * (x1 + x2 + t)
        for (i, j, k), c in self.components[comp].items():
            out = out + c * x1 ** i * x2 ** j * t ** k
        return out

    @staticmethod
    def _diff(poly, var):
        out = {}
        for mono, c in poly.items():
            e = mono[var]
            if e:
                key = list(mono)
                key[var] = e - 1
                key = tuple(key)
                out[key] = out.get(key, 0.0) + c * e
        return out

    def divergence(self):
        """Spacetime divergence d1 F1 + d2 F2 + dt F3 as a monomial dict."""
        div = {}
        for var in range(3):
            for mono, c in self._diff(self.components[var], var).items():
                div[mono] = div.get(mono, 0.0) + c
        return div

    @staticmethod
    def eval_poly(poly, x1, x2, t):
        out = 0.0 * (x1 + x2 + t)
        for (i, j, k), c in poly.items():
            out = out + c * x1 ** i * x2 ** j * t ** k
        return out


def piola_identity_check(field, tent_map, n_that=5):
    """Relative residual of the pullback divergence identity.

    The pulled-back field is Fhat = det(DPhi) DPhi^{-1} (F o Phi); its
    cylinder divergence must equal delta * (div F) o Phi.  The left side
    is differentiated by complex step (exact for polynomials); the right
    side uses the symbolic divergence.  Returns max |lhs-rhs| / scale.
    """
    from .quadrature import triangle_rule

    div = field.divergence()
    bary, _ = triangle_rule(4)
    h = 1e-50
    ih = 1j * h
    resid = 0.0
    scale = 1.0
    mesh = tent_map.patch.mesh
    for e, t_elem in enumerate(tent_map.patch.elements):
        tri = mesh.vertices[mesh.elements[t_elem]]
        pts = bary @ tri
        x1, x2 = pts[:, 0], pts[:, 1]
        tb = bary @ tent_map.tau_bot[tent_map.elem_vertices[e]]
        tt = bary @ tent_map.tau_top[tent_map.elem_vertices[e]]
        gb, gt = tent_map.grad_bot[e], tent_map.grad_top[e]
        # affine representations valid on this element
        cb = tb - (gb[0] * x1 + gb[1] * x2)
        ct = tt - (gt[0] * x1 + gt[1] * x2)

        def fhat(comp, a1, a2, tau):
            taub = cb + gb[0] * a1 + gb[1] * a2
            taut = ct + gt[0] * a1 + gt[1] * a2
            phi = (1.0 - tau) * taub + tau * taut
            if comp < 2:
                return (taut - taub) * field.eval(comp, a1, a2, phi)
            g1 = (1.0 - tau) * gb[0] + tau * gt[0]
            g2 = (1.0 - tau) * gb[1] + tau * gt[1]
            return (field.eval(2, a1, a2, phi)
                    - g1 * field.eval(0, a1, a2, phi)
                    - g2 * field.eval(1, a1, a2, phi))

        for that in np.linspace(0.0, 1.0, n_that):
            lhs = (fhat(0, x1 + ih, x2, that).imag
                   + fhat(1, x1, x2 + ih, that).imag
                   + fhat(2, x1, x2, that + ih).imag) / h
            phi = (1.0 - that) * tb + that * tt
            delta = tt - tb
            rhs = delta * PolyField.eval_poly(div, x1, x2, phi)
            resid = max(resid, np.max(np.abs(lhs - rhs)))
            for comp in range(3):
                scale = max(scale,
                            np.max(np.abs(field.eval(comp, x1, x2, phi))))
    return resid / scale


def mapped_data(law, tent_map, elem, bary, that, w):
    """Frozen-coefficient data of the mapped system at cylinder points.

    Points are given in barycentric coordinates of patch element `elem`;
    returns (ghat, fhat, bhat, Ghat(w)) with
    Ghat = ghat - fhat . grad phi.
    """
    bary = np.atleast_2d(bary)
    mesh = tent_map.patch.mesh
    tri = mesh.vertices[mesh.elements[tent_map.patch.elements[elem]]]
    x = (bary @ tri).T
    t = tent_map.phi_at(elem, bary, that)
    ghat = law.temporal(x, t, w)
    fhat = law.flux(x, t, w)
    bhat = law.source(x, t, w)
    gphi = tent_map.grad_phi(that)[elem]
    Ghat = ghat - np.einsum("ljn,j->ln", fhat, gphi)
    return ghat, fhat, bhat, Ghat
