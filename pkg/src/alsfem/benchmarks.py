"""Benchmark problem definitions with exact element data where possible.

Three problems: constant load on the L-shaped domain, an indicator load
with a small square support (microstructure) integrated exactly by convex
clipping, and a smooth manufactured solution on the unit square
(waterfall) with data integrals by quadrature.
"""

from __future__ import annotations

import math
import re

import numpy as np

from . import geometry, mesh as mesh_mod
from .quadrature import conical_rule


class ExactSolution:
    def __init__(self, u, grad_u):
        self.u = u
        self.grad_u = grad_u


class Problem:
    """Right-hand side with per-triangle integrals of f and f^2."""

    name: str
    domain: str
    f_norm_sq: float
    exact_solution: ExactSolution | None = None

    def f(self, pts):
        raise NotImplementedError

    def _integrals(self, mesh):
        raise NotImplementedError

    def element_integrals(self, mesh):
        """(int_T f, int_T f^2) per leaf; cached until the mesh mutates."""
        key = ("elemint", self.name)
        if key not in mesh._cache:
            mesh._cache[key] = self._integrals(mesh)
        return mesh._cache[key]

    def mu_evaluator(self, tri) -> float:
        """Data error ||(1 - Pi) f||_{L2(T)} of a single triangle."""
        intf, intf2, area = self._single_integrals(tri)
        return math.sqrt(max(intf2 - intf ** 2 / area, 0.0))

    def _single_integrals(self, tri):
        raise NotImplementedError


def _tri_area(tri):
    d1 = tri[1] - tri[0]
    d2 = tri[2] - tri[0]
    return 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])


class LShapeProblem(Problem):
    """f = 1 on the L-shaped domain (-1,1)^2 minus the closed top-right square."""

    def __init__(self):
        self.name = "lshape"
        self.domain = "l_shape"
        self.f_norm_sq = 3.0

    def f(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.ones(pts.shape[:-1])

    def _integrals(self, mesh):
        areas = mesh.leaf_areas()
        return areas.copy(), areas.copy()

    def _single_integrals(self, tri):
        a = _tri_area(np.asarray(tri, dtype=float))
        return a, a, a


class MicrostructureProblem(Problem):
    """Indicator load on the square |x1 + 1/2| <= eps, |x2 - 1/2| <= eps.

    Element integrals of f and f^2 both equal the area of the clipped
    intersection with the support, computed exactly.
    """

    def __init__(self, epsilon: float):
        if not 0.0 < epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")
        self.epsilon = float(epsilon)
        self.name = f"micro:{epsilon!r}"
        self.domain = "l_shape"
        self.f_norm_sq = (2.0 * epsilon) ** 2
        self.support = (-0.5 - epsilon, -0.5 + epsilon,
                        0.5 - epsilon, 0.5 + epsilon)

    def f(self, pts):
        pts = np.asarray(pts, dtype=float)
        xlo, xhi, ylo, yhi = self.support
        x, y = pts[..., 0], pts[..., 1]
        inside = (x >= xlo) & (x <= xhi) & (y >= ylo) & (y <= yhi)
        return inside.astype(float)

    def _clip_area(self, tri):
        xlo, xhi, ylo, yhi = self.support
        return geometry.clip_triangle_aabb(tri, xlo, xhi, ylo, yhi)

    def _integrals(self, mesh):
        c = mesh.leaf_coords()
        xlo, xhi, ylo, yhi = self.support
        # only triangles whose bounding box overlaps the support need clipping
        cx0 = c[:, :, 0].min(axis=1)
        cx1 = c[:, :, 0].max(axis=1)
        cy0 = c[:, :, 1].min(axis=1)
        cy1 = c[:, :, 1].max(axis=1)
        hit = (cx1 > xlo) & (cx0 < xhi) & (cy1 > ylo) & (cy0 < yhi)
        intf = np.zeros(c.shape[0])
        for i in np.nonzero(hit)[0]:
            intf[i] = self._clip_area(c[i])
        return intf, intf.copy()

    def _single_integrals(self, tri):
        tri = np.asarray(tri, dtype=float)
        s = self._clip_area(tri)
        return s, s, _tri_area(tri)


def _waterfall_factor(t, k, m):
    """b(t) G(t) with b = t^2 - t, G = exp(-k (t - m)^2), plus b G''-like term.

    Returns (value, second_derivative) of v(t) = (t^2 - t) exp(-k(t-m)^2).
    """
    b = t * t - t
    g = np.exp(-k * (t - m) ** 2)
    v = b * g
    vpp = g * (2.0 - 2.0 * k * b - 4.0 * k * (t - m) * (2.0 * t - 1.0)
               + 4.0 * k * k * (t - m) ** 2 * b)
    return v, vpp


def _waterfall_factor_prime(t, k, m):
    b = t * t - t
    g = np.exp(-k * (t - m) ** 2)
    return g * ((2.0 * t - 1.0) - 2.0 * k * (t - m) * b)


_WK1, _WM1 = 100.0, 0.5
_WK2, _WM2 = 1.0e-4, 117.0


def waterfall_u(pts):
    pts = np.asarray(pts, dtype=float)
    v1, _ = _waterfall_factor(pts[..., 0], _WK1, _WM1)
    v2, _ = _waterfall_factor(pts[..., 1], _WK2, _WM2)
    return v1 * v2


def waterfall_grad_u(pts):
    pts = np.asarray(pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    v1, _ = _waterfall_factor(x, _WK1, _WM1)
    v2, _ = _waterfall_factor(y, _WK2, _WM2)
    d1 = _waterfall_factor_prime(x, _WK1, _WM1)
    d2 = _waterfall_factor_prime(y, _WK2, _WM2)
    return np.stack((d1 * v2, v1 * d2), axis=-1)


def waterfall_f(pts):
    """f = -laplace(u) for the manufactured waterfall solution."""
    pts = np.asarray(pts, dtype=float)
    v1, v1pp = _waterfall_factor(pts[..., 0], _WK1, _WM1)
    v2, v2pp = _waterfall_factor(pts[..., 1], _WK2, _WM2)
    return -(v1pp * v2 + v1 * v2pp)


class WaterfallProblem(Problem):
    """Manufactured smooth solution on the unit square; f by quadrature."""

    def __init__(self, quad_k: int = 5):
        self.name = f"waterfall:k{quad_k}"
        self.domain = "unit_square"
        self.quad_k = quad_k
        self.exact_solution = ExactSolution(waterfall_u, waterfall_grad_u)
        self.f_norm_sq = self._compute_f_norm_sq()

    def f(self, pts):
        return waterfall_f(pts)

    def _quad_integrals(self, coords, areas, k):
        rule = conical_rule(k)
        jac = np.stack((coords[:, 1] - coords[:, 0],
                        coords[:, 2] - coords[:, 0]), axis=2)
        pts = np.einsum("qj,nij->nqi", rule.points, jac) + coords[:, None, 0]
        w = rule.weights[None, :] * (2.0 * areas)[:, None]
        fv = waterfall_f(pts)
        return np.sum(w * fv, axis=1), np.sum(w * fv * fv, axis=1)

    def _integrals(self, mesh):
        return self._quad_integrals(mesh.leaf_coords(), mesh.leaf_areas(),
                                    self.quad_k)

    def _single_integrals(self, tri):
        tri = np.asarray(tri, dtype=float)[None]
        area = np.array([_tri_area(tri[0])])
        intf, intf2 = self._quad_integrals(tri, area, self.quad_k)
        return float(intf[0]), float(intf2[0]), float(area[0])

    def _compute_f_norm_sq(self) -> float:
        # one-off high-order quadrature of f^2 on a fine uniform mesh
        m = mesh_mod.initial_mesh("unit_square")
        for _ in range(4):
            m.refine(m.leaves(), mode=mesh_mod.BISEC3)
        _, intf2 = self._quad_integrals(m.leaf_coords(), m.leaf_areas(), 8)
        return float(np.sum(intf2))


def exact_errors(problem, solution, mesh, k: int = 5):
    """(||grad(u - u_h)||, ||p - p_h||_L2, ||f + div p_h||) via quadrature."""
    if problem.exact_solution is None:
        raise ValueError(f"problem {problem.name} has no exact solution")
    from . import fem

    rule = conical_rule(k)
    c = mesh.leaf_coords()
    areas = mesh.leaf_areas()
    jac = np.stack((c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=2)
    pts = np.einsum("qj,nij->nqi", rule.points, jac) + c[:, None, 0]
    w = rule.weights[None, :] * (2.0 * areas)[:, None]

    grad_exact = problem.exact_solution.grad_u(pts)   # (n, q, 2)
    div_p, grad_u, p_at = fem.evaluate_fields(mesh, solution)

    dgrad = grad_exact - grad_u[:, None, :]
    err_grad_sq = np.einsum("nq,nqx,nqx->", w, dgrad, dgrad)
    dflux = grad_exact - p_at(pts)
    err_flux_sq = np.einsum("nq,nqx,nqx->", w, dflux, dflux)

    intf, intf2 = problem.element_integrals(mesh)
    err_div_sq = np.sum(intf2 + 2.0 * div_p * intf + areas * div_p ** 2)
    return (math.sqrt(max(err_grad_sq, 0.0)),
            math.sqrt(max(err_flux_sq, 0.0)),
            math.sqrt(max(err_div_sq, 0.0)))


_EPS_RE = re.compile(r"^(\d+(?:\.\d+)?)\^(-?\d+)$")


def parse_epsilon(text: str) -> float:
    """Accept '2^-5'-style powers or plain decimal literals."""
    m = _EPS_RE.match(text.strip())
    if m:
        return float(m.group(1)) ** int(m.group(2))
    return float(text)


def make_problem(spec: str, quad_k: int = 5) -> Problem:
    """Problem selection by CLI name: lshape, micro:<eps>, waterfall."""
    if spec == "lshape":
        return LShapeProblem()
    if spec.startswith("micro:"):
        return MicrostructureProblem(parse_epsilon(spec.split(":", 1)[1]))
    if spec == "waterfall":
        return WaterfallProblem(quad_k=quad_k)
    raise ValueError(f"unknown problem {spec!r}")
