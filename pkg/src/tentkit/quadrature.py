"""Quadrature rules on triangles and edges.

Triangle rules are symmetric positive-weight rules for degrees up to 8
(tables below), with a collapsed tensor-product fallback for anything
higher.  Rules are returned in barycentric coordinates with weights that
sum to one, so physical integration is `area * sum(w * f(points))`.
"""

import numpy as np

__all__ = ["triangle_rule", "edge_rule", "triangle_points"]


def _sym3(groups):
    """Expand (a, b, b)-style orbit groups into explicit points."""
    pts, wts = [], []
    for vals, w in groups:
        if len(vals) == 1:
            pts.append((vals[0],) * 3)
            wts.append(w)
        elif len(vals) == 2:
            a, b = vals
            for perm in ((a, b, b), (b, a, b), (b, b, a)):
                pts.append(perm)
                wts.append(w)
        else:
            a, b, c = vals
            for perm in ((a, b, c), (a, c, b), (b, a, c),
                         (b, c, a), (c, a, b), (c, b, a)):
                pts.append(perm)
                wts.append(w)
    return np.array(pts), np.array(wts)


# Symmetric rules (orbit generators and weights); weights sum to 1.
_TRI_TABLES = {
    1: [((1.0 / 3.0,), 1.0)],
    2: [((2.0 / 3.0, 1.0 / 6.0), 1.0 / 3.0)],
    4: [((0.108103018168070, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771), 0.109951743655322)],
    5: [((1.0 / 3.0,), 9.0 / 40.0),
        ((0.059715871789770, 0.470142064105115), (155.0 + np.sqrt(15.0)) / 1200.0),
        ((0.797426985353087, 0.101286507323456), (155.0 - np.sqrt(15.0)) / 1200.0)],
    6: [((0.501426509658179, 0.249286745170910), 0.116786275726379),
        ((0.873821971016996, 0.063089014491502), 0.050844906370207),
        ((0.053145049844817, 0.310352451033784, 0.636502499121399),
         0.082851075618374)],
}

_tri_cache = {}


def _duffy_rule(degree):
    # Collapse the unit square onto the unit triangle; the Jacobian
    # (1-xi) raises the xi-degree by one.
    n = int(np.ceil((degree + 2) / 2.0))
    g, gw = np.polynomial.legendre.leggauss(n)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    xi, eta = np.meshgrid(g, g, indexing="ij")
    wx, wy = np.meshgrid(gw, gw, indexing="ij")
    x = xi.ravel()
    y = (eta * (1.0 - xi)).ravel()
    w = (wx * wy * (1.0 - xi)).ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    return bary, 2.0 * w   # unit right triangle has area 1/2


def triangle_rule(degree):
    """Rule exact for polynomials up to `degree`: (bary (n,3), w (n,))."""
    if degree < 1:
        degree = 1
    key = degree
    if key not in _tri_cache:
        tab = None
        for d in sorted(_TRI_TABLES):
            if d >= degree:
                tab = _TRI_TABLES[d]
                break
        if tab is not None:
            _tri_cache[key] = _sym3(tab)
        else:
            _tri_cache[key] = _duffy_rule(degree)
    return _tri_cache[key]


def triangle_points(bary, tri):
    """Map barycentric points onto a physical triangle (3,2) -> (n,2)."""
    return bary @ np.asarray(tri)


_edge_cache = {}


def edge_rule(n):
    """n-point Gauss rule on (0,1): (t (n,), w (n,)), weights sum to 1."""
    if n not in _edge_cache:
        g, gw = np.polynomial.legendre.leggauss(n)
        _edge_cache[n] = (0.5 * (g + 1.0), 0.5 * gw)
    return _edge_cache[n]
