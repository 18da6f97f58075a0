"""Gaussian quadrature on the reference triangle via conical product rules.

One-dimensional Gauss-Legendre and Gauss-Jacobi (weight 1 - xi) rules on
[0, 1] are computed with the Golub-Welsch algorithm and combined through
the transform (y1, y2) -> (y1, (1 - y1) y2) from the unit square to the
reference triangle conv{(0,0), (1,0), (0,1)}.  A rule with k^2 points
integrates all polynomials of total degree up to 2k - 1 exactly (the
substitution turns x^a y^b into a degree a + b polynomial against the
Jacobi weight, so the bound is on a + b, not on a and b separately).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal


class QuadratureError(RuntimeError):
    """Raised when the symmetric tridiagonal eigen-solve fails."""


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on the reference triangle.

    points has shape (n, 2), weights shape (n,); the weights sum to 1/2
    and the rule is exact for total degree up to exactness_degree.
    """
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int


def golub_welsch(alphas, betas, mu0: float, k: int):
    """Nodes and weights of the k-point Gauss rule for a positive measure.

    alphas/betas are the monic three-term recurrence coefficients
    p_{n+1} = (x - a_n) p_n - b_n p_{n-1}; mu0 is the total mass of the
    weight.  Nodes are the eigenvalues of the Jacobi matrix and weights
    mu0 times the squared first eigenvector components.
    """
    if k < 1:
        raise ValueError("need at least one quadrature point")
    a = np.asarray(alphas, dtype=float)[:k]
    b = np.asarray(betas, dtype=float)[1:k]
    if np.any(b <= 0.0):
        raise ValueError("recurrence does not define a positive measure")
    try:
        nodes, vecs = eigh_tridiagonal(a, np.sqrt(b))
    except Exception as exc:  # pragma: no cover - eigensolver failure
        raise QuadratureError(f"tridiagonal eigen-solve failed: {exc}") from exc
    weights = mu0 * vecs[0, :] ** 2
    return nodes, weights


def legendre_recurrence(k: int):
    """Monic recurrence of the Legendre weight w = 1 on [0, 1]."""
    n = np.arange(k, dtype=float)
    alphas = np.full(k, 0.5)
    betas = np.empty(k)
    betas[0] = 1.0  # mu0 slot, unused by golub_welsch
    if k > 1:
        m = n[1:]
        betas[1:] = m ** 2 / (4.0 * (4.0 * m ** 2 - 1.0))
    return alphas, betas, 1.0


def jacobi_recurrence(k: int):
    """Monic recurrence of the weight w(xi) = 1 - xi on [0, 1].

    This is the Jacobi (alpha=1, beta=0) weight mapped from [-1, 1].
    """
    n = np.arange(k, dtype=float)
    # on [-1, 1]: a_n = -1 / ((2n+1)(2n+3)),  b_n = n(n+1) / (2n+1)^2
    a = -1.0 / ((2.0 * n + 1.0) * (2.0 * n + 3.0))
    alphas = (a + 1.0) / 2.0
    betas = np.empty(k)
    betas[0] = 0.5
    if k > 1:
        m = n[1:]
        betas[1:] = (m * (m + 1.0) / (2.0 * m + 1.0) ** 2) / 4.0
    return alphas, betas, 0.5


def gauss_legendre_01(k: int):
    """k-point Gauss-Legendre rule on [0, 1]."""
    alphas, betas, mu0 = legendre_recurrence(k)
    return golub_welsch(alphas, betas, mu0, k)


def gauss_jacobi_01(k: int):
    """k-point Gauss rule on [0, 1] for the weight 1 - xi."""
    alphas, betas, mu0 = jacobi_recurrence(k)
    return golub_welsch(alphas, betas, mu0, k)


@lru_cache(maxsize=None)
def conical_rule(k: int) -> QuadratureRule:
    """Conical product rule with k^2 points on the reference triangle."""
    xj, wj = gauss_jacobi_01(k)
    xl, wl = gauss_legendre_01(k)
    pts = np.empty((k * k, 2))
    wts = np.empty(k * k)
    idx = 0
    for i in range(k):
        for j in range(k):
            pts[idx, 0] = xj[i]
            pts[idx, 1] = (1.0 - xj[i]) * xl[j]
            wts[idx] = wj[i] * wl[j]
            idx += 1
    return QuadratureRule(points=pts, weights=wts, exactness_degree=2 * k - 1)


def map_to_triangle(rule: QuadratureRule, tri):
    """Map reference points/weights to a physical triangle.

    Returns (points (n, 2), weights (n,)); the weights sum to area(T).
    """
    v = np.asarray(tri, dtype=float)
    jac = np.column_stack((v[1] - v[0], v[2] - v[0]))
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    area = abs(det) / 2.0
    if area == 0.0:
        raise ValueError("degenerate triangle")
    pts = rule.points @ jac.T + v[0]
    wts = rule.weights * (2.0 * area)
    return pts, wts


def integrate_on_triangle(f, tri, k: int = 5) -> float:
    """Integrate a scalar field f(points) -> values over a triangle."""
    pts, wts = map_to_triangle(conical_rule(k), tri)
    return float(np.dot(wts, np.asarray(f(pts), dtype=float)))
