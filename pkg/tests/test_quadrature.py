import math

import numpy as np
import pytest

from alsfem import quadrature


def _monomial_integral_reference_triangle(a: int, b: int) -> float:
    """int over conv{(0,0),(1,0),(0,1)} of x^a y^b = a! b! / (a+b+2)!."""
    return (math.factorial(a) * math.factorial(b)
            / math.factorial(a + b + 2))


def test_gauss_legendre_01_matches_numpy():
    for k in range(1, 9):
        x, w = quadrature.gauss_legendre_01(k)
        xr, wr = np.polynomial.legendre.leggauss(k)
        assert np.allclose(np.sort(x), (np.sort(xr) + 1.0) / 2.0, atol=1e-14)
        assert np.allclose(np.sort(w), np.sort(wr / 2.0), atol=1e-14)


def test_gauss_legendre_polynomial_exactness():
    for k in range(1, 8):
        x, w = quadrature.gauss_legendre_01(k)
        for d in range(2 * k):
            assert np.dot(w, x ** d) == pytest.approx(1.0 / (d + 1), abs=1e-14)


def test_gauss_jacobi_weight_moments():
    # int_0^1 (1 - xi) xi^d = 1/(d+1) - 1/(d+2)
    for k in range(1, 8):
        x, w = quadrature.gauss_jacobi_01(k)
        assert np.all((0.0 < x) & (x < 1.0))
        assert np.all(w > 0.0)
        for d in range(2 * k):
            exact = 1.0 / (d + 1) - 1.0 / (d + 2)
            assert np.dot(w, x ** d) == pytest.approx(exact, abs=1e-14)


def test_golub_welsch_rejects_bad_input():
    with pytest.raises(ValueError):
        quadrature.golub_welsch([0.0], [1.0], 1.0, 0)
    with pytest.raises(ValueError):
        quadrature.golub_welsch([0.0, 0.0], [1.0, -0.5], 1.0, 2)


def test_conical_rule_k1_is_centroid():
    rule = quadrature.conical_rule(1)
    assert rule.points.shape == (1, 2)
    assert rule.points[0] == pytest.approx([1.0 / 3.0, 1.0 / 3.0])
    assert rule.weights[0] == pytest.approx(0.5)


def test_conical_rule_weights_sum_to_half():
    for k in range(1, 8):
        rule = quadrature.conical_rule(k)
        assert rule.points.shape == (k * k, 2)
        assert np.sum(rule.weights) == pytest.approx(0.5, abs=1e-14)
        # all points strictly inside the reference triangle
        x, y = rule.points[:, 0], rule.points[:, 1]
        assert np.all((x > 0) & (y > 0) & (x + y < 1))


def test_conical_rule_exactness_table():
    """Exact for all monomials x^a y^b with a + b <= 2k - 1, k <= 6."""
    for k in range(1, 7):
        rule = quadrature.conical_rule(k)
        deg = rule.exactness_degree
        assert deg == 2 * k - 1
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                val = np.dot(rule.weights,
                             rule.points[:, 0] ** a * rule.points[:, 1] ** b)
                exact = _monomial_integral_reference_triangle(a, b)
                assert abs(val - exact) <= 1e-13, (k, a, b)


def test_conical_rule_first_nonexact_degree():
    # the bound is on the total degree: k = 1 handles x and y but not
    # x^2 or x*y (each total degree 2)
    rule = quadrature.conical_rule(1)
    for a, b in ((2, 0), (1, 1)):
        val = np.dot(rule.weights,
                     rule.points[:, 0] ** a * rule.points[:, 1] ** b)
        assert abs(val - _monomial_integral_reference_triangle(a, b)) > 1e-3


def test_map_to_triangle_weight_sum_is_area():
    tri = np.array([(0.2, -1.0), (1.5, 0.3), (-0.4, 2.0)])
    rule = quadrature.conical_rule(3)
    pts, wts = quadrature.map_to_triangle(rule, tri)
    d1, d2 = tri[1] - tri[0], tri[2] - tri[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    assert np.sum(wts) == pytest.approx(area, abs=1e-14)


def test_map_to_triangle_degenerate_raises():
    with pytest.raises(ValueError):
        quadrature.map_to_triangle(
            quadrature.conical_rule(2),
            np.array([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]))


def test_integrate_on_triangle_affine_invariance():
    sympy = pytest.importorskip("sympy")
    x, y = sympy.symbols("x y")
    expr = (x ** 3 * y - 2 * x * y ** 2 + y ** 4 + 1) / 3
    tri = np.array([(0.1, 0.2), (1.3, 0.4), (0.5, 1.7)])
    # symbolic reference: integrate over the mapped triangle
    u, v = sympy.symbols("u v")
    xm = tri[0][0] + (tri[1][0] - tri[0][0]) * u + (tri[2][0] - tri[0][0]) * v
    ym = tri[0][1] + (tri[1][1] - tri[0][1]) * u + (tri[2][1] - tri[0][1]) * v
    jac = abs((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
              - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]))
    integrand = expr.subs({x: xm, y: ym}) * jac
    exact = float(sympy.integrate(
        sympy.integrate(integrand, (v, 0, 1 - u)), (u, 0, 1)))

    def fnum(pts):
        px, py = pts[:, 0], pts[:, 1]
        return (px ** 3 * py - 2 * px * py ** 2 + py ** 4 + 1) / 3

    got = quadrature.integrate_on_triangle(fnum, tri, k=3)
    assert got == pytest.approx(exact, rel=1e-13)
