"""Per-triangle a-posteriori quantities.

Five reports share one container: the built-in estimator (NAT, identical
to the least-squares functional), the residual estimator (SEP), the
collective estimator (COL = SEP + oscillation), the data oscillation
(OSC) and the data error (MU, without mesh-size prefactor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem

# 2-point Gauss on [0, 1]: exact for the squared linear edge integrands
_EDGE_GAUSS = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


@dataclass
class EstimatorReport:
    kind: str
    per_triangle: np.ndarray  # squared indicator per leaf, leaf-id order
    total_sq: float

    @classmethod
    def from_values(cls, kind: str, values_sq: np.ndarray):
        return cls(kind=kind, per_triangle=values_sq,
                   total_sq=float(np.sum(values_sq)))

    @property
    def total(self) -> float:
        return float(np.sqrt(self.total_sq))


def eta_nat(mesh, solution, problem) -> EstimatorReport:
    """Built-in estimator: ||f + div p||_T^2 + ||p - grad u||_T^2.

    The first term is expanded through the exact element integrals of f
    and f^2, so the report sums to the least-squares functional exactly.
    """
    intf, intf2 = problem.element_integrals(mesh)
    areas = mesh.leaf_areas()
    div_p, _, _ = fem.evaluate_fields(mesh, solution)
    div_term = intf2 + 2.0 * div_p * intf + areas * div_p ** 2
    grad_term = fem.flux_grad_mismatch_sq(mesh, solution)
    return EstimatorReport.from_values("NAT", div_term + grad_term)


def _edge_jump_integrals(mesh, solution):
    """Per-edge integrals of the squared normal/tangential jumps of p - grad u.

    Boundary edges carry only the tangential trace; the normal entry is 0.
    """
    table = mesh.edge_table()
    coords = mesh.vertex_coords()
    c = mesh.leaf_coords()
    areas = mesh.leaf_areas()
    elen = table["length"][table["leaf_edges"]]
    sign = table["leaf_sign"]
    pc = sign * elen / (2.0 * areas[:, None]) * \
        solution.p_coeffs[table["leaf_edges"]]
    _, grad_u, _ = fem.evaluate_fields(mesh, solution)

    everts = table["verts"]
    boundary = table["boundary"]
    tp = table["leaves"][:, 0]
    tm = table["leaves"][:, 1]
    nrm = table["normal"]
    tau = table["tangent"]
    length = table["length"]

    jn = np.zeros(everts.shape[0])
    jt = np.zeros(everts.shape[0])
    for s in _EDGE_GAUSS:
        pt = (1.0 - s) * coords[everts[:, 0]] + s * coords[everts[:, 1]]

        def field_on(side):
            diffs = pt[:, None, :] - c[side]
            return np.einsum("ei,eix->ex", pc[side], diffs) - grad_u[side]

        w_plus = field_on(tp)
        jump = w_plus.copy()
        interior = ~boundary
        w_minus = field_on(np.where(interior, tm, tp))
        jump[interior] -= w_minus[interior]
        jn += np.where(boundary, 0.0, np.sum(jump * nrm, axis=1) ** 2)
        jt += np.sum(jump * tau, axis=1) ** 2
    # both Gauss weights are 1/2
    return 0.5 * length * jn, 0.5 * length * jt


def curl_per_triangle(mesh, solution) -> np.ndarray:
    """Elementwise curl of p - grad u, reconstructed from point values.

    Vanishes identically in the lowest-order case; computed generically as
    the antisymmetric part of the linear field's Jacobian.
    """
    c_, table, areas, elen, sign, grads = fem._element_geometry(mesh)
    pc = sign * elen / (2.0 * areas[:, None]) * \
        solution.p_coeffs[table["leaf_edges"]]
    # values of p at the three vertices
    diffs = c_[:, :, None, :] - c_[:, None, :, :]   # (n, vtx, basis, 2)
    vals = np.einsum("ni,nvix->nvx", pc, diffs)
    jac = np.einsum("nvx,nvy->nxy", vals, grads)
    return jac[:, 1, 0] - jac[:, 0, 1]


def eta_sep(mesh, solution) -> EstimatorReport:
    """Residual estimator built from the constitutive residual p - grad u."""
    areas = mesh.leaf_areas()
    div_p, _, _ = fem.evaluate_fields(mesh, solution)
    curl = curl_per_triangle(mesh, solution)
    vol = areas ** 2 * (div_p ** 2 + curl ** 2)

    jn, jt = _edge_jump_integrals(mesh, solution)
    table = mesh.edge_table()
    le = table["leaf_edges"]
    jump_n = np.sum(jn[le], axis=1)
    jump_t = np.sum(jt[le], axis=1)
    values = vol + np.sqrt(areas) * (jump_n + jump_t)
    return EstimatorReport.from_values("SEP", values)


def mu(mesh, problem) -> EstimatorReport:
    """Data error mu^2(T) = ||(1 - Pi) f||^2_{L2(T)} (no mesh-size factor)."""
    intf, intf2 = problem.element_integrals(mesh)
    values = fem.l2_err_p0_sq(intf, intf2, mesh.leaf_areas())
    return EstimatorReport.from_values("MU", values)


def osc(mesh, problem) -> EstimatorReport:
    """Data oscillation osc^2(T) = |T| ||(1 - Pi) f||^2_{L2(T)}."""
    intf, intf2 = problem.element_integrals(mesh)
    areas = mesh.leaf_areas()
    values = areas * fem.l2_err_p0_sq(intf, intf2, areas)
    return EstimatorReport.from_values("OSC", values)


def eta_col(mesh, solution, problem,
            sep_report: EstimatorReport | None = None) -> EstimatorReport:
    """Collective estimator eta_SEP^2 + |T| ||(1 - Pi) f||^2 per triangle."""
    if sep_report is None:
        sep_report = eta_sep(mesh, solution)
    osc_report = osc(mesh, problem)
    return EstimatorReport.from_values(
        "COL", sep_report.per_triangle + osc_report.per_triangle)
