import numpy as np
import pytest

from tentkit.quadrature import edge_rule, triangle_points, triangle_rule


def exact_monomial(a, b):
    # int over unit right triangle of x^a y^b = a! b! / (a+b+2)!
    from math import factorial
    return factorial(a) * factorial(b) / factorial(a + b + 2)


REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.mark.parametrize("degree", range(1, 13))
def test_triangle_rule_exact_on_monomials(degree):
    bary, w = triangle_rule(degree)
    pts = triangle_points(bary, REF)
    area = 0.5
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            val = area * np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b)
            assert abs(val - exact_monomial(a, b)) < 1e-14, (degree, a, b)


def test_triangle_weights_positive_and_normalized():
    for degree in range(1, 9):
        bary, w = triangle_rule(degree)
        assert np.all(w > 0)
        assert abs(w.sum() - 1.0) < 1e-13
        assert np.all(bary >= -1e-14) and np.all(bary <= 1 + 1e-14)
        assert np.allclose(bary.sum(axis=1), 1.0, atol=1e-13)


def test_edge_rule_exactness():
    t, w = edge_rule(4)
    for k in range(8):  # 4-point Gauss exact to degree 7
        assert abs(np.sum(w * t ** k) - 1.0 / (k + 1)) < 1e-14


def test_triangle_points_affine_map():
    tri = np.array([[1.0, 2.0], [3.0, 2.0], [1.0, 5.0]])
    bary, w = triangle_rule(2)
    pts = triangle_points(bary, tri)
    # centroid is preserved by the rule's symmetry
    assert np.allclose(pts.mean(axis=0), tri.mean(axis=0), atol=1e-12)
