"""Lowest-order least-squares FEM for the Poisson first-order system.

The flux is discretized in RT0 (one dof per edge, globally oriented by
the edge normal) and the potential in P1 with homogeneous Dirichlet
values (one dof per interior vertex).  Minimizing

    LS(f; q, v) = ||f + div q||^2 + ||q - grad v||^2

over the discrete product space leads to a symmetric positive definite
normal-equation system assembled here element by element with quadrature
that is exact for the polynomial integrands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import conical_rule


class FEMError(RuntimeError):
    pass


@dataclass
class DofMap:
    """Global numbering: edge dofs first, then interior vertex dofs."""
    n_edges: int
    vertex_dof: np.ndarray  # vertex id -> global dof index or -1 (boundary)
    ndof: int


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    f_norm_sq: float
    dofmap: DofMap


@dataclass
class Solution:
    """Coefficients of the discrete minimizer."""
    p_coeffs: np.ndarray   # one signed value per edge (RT0)
    u_vertex: np.ndarray   # one value per vertex, zero on the boundary
    dofmap: DofMap

    @classmethod
    def zero(cls, mesh):
        dofmap = build_dofmap(mesh)
        return cls(np.zeros(dofmap.n_edges),
                   np.zeros(mesh.n_vertices), dofmap)


def build_dofmap(mesh) -> DofMap:
    table = mesh.edge_table()
    n_edges = table["verts"].shape[0]
    vertex_dof = np.full(mesh.n_vertices, -1, dtype=np.int64)
    interior = mesh.interior_vertex_ids()
    vertex_dof[interior] = n_edges + np.arange(interior.size)
    return DofMap(n_edges=n_edges, vertex_dof=vertex_dof,
                  ndof=n_edges + interior.size)


def _element_geometry(mesh):
    """Per-leaf arrays used by assembly and field evaluation."""
    c = mesh.leaf_coords()                      # (n, 3, 2)
    table = mesh.edge_table()
    areas = mesh.leaf_areas()
    elen = table["length"][table["leaf_edges"]]  # (n, 3)
    sign = table["leaf_sign"]                    # (n, 3)
    # gradients of the barycentric coordinates (CCW triangles)
    grads = np.empty_like(c)
    for i in range(3):
        e = c[:, (i + 1) % 3] - c[:, (i + 2) % 3]
        grads[:, i, 0] = e[:, 1]
        grads[:, i, 1] = -e[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return c, table, areas, elen, sign, grads


def assemble(mesh, problem) -> SparseSystem:
    """Normal-equation system of the least-squares minimization."""
    if np.any(mesh.leaf_areas() <= 0.0):
        raise FEMError("degenerate (zero-area) triangle in mesh")
    c, table, areas, elen, sign, grads = _element_geometry(mesh)
    n = c.shape[0]
    dofmap = build_dofmap(mesh)

    d = sign * elen / areas[:, None]            # div of RT0 basis, (n, 3)
    coef = sign * elen / (2.0 * areas[:, None])  # RT0 scaling, (n, 3)

    # quadrature exact for the quadratic RT0 mass integrand
    rule = conical_rule(2)
    q = rule.points.shape[0]
    jac = np.stack((c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=2)  # (n,2,2)
    pts = np.einsum("qj,nij->nqi", rule.points, jac) + c[:, None, 0]
    w = rule.weights[None, :] * (2.0 * areas)[:, None]              # (n, q)

    diffs = pts[:, :, None, :] - c[:, None, :, :]   # (n, q, 3, 2): x - P_i
    # RT0 mass block: coef_i coef_j  int (x-P_i).(x-P_j)
    pairdot = np.einsum("nqix,nqjx->nij", diffs * w[:, :, None, None], diffs)
    mass = coef[:, :, None] * coef[:, None, :] * pairdot
    divdiv = (d[:, :, None] * d[:, None, :]) * areas[:, None, None]

    # coupling: int psi_i . grad lambda_z = coef_i grad_z . A (centroid - P_i)
    centroid = c.mean(axis=1)
    cp = (centroid[:, None, :] - c) * areas[:, None, None]  # (n, 3, 2)
    coup = coef[:, :, None] * np.einsum("nix,nzx->niz", cp, grads)

    stiff = np.einsum("nzx,nwx->nzw", grads, grads) * areas[:, None, None]

    elem = np.empty((n, 6, 6))
    elem[:, :3, :3] = divdiv + mass
    elem[:, :3, 3:] = -coup
    elem[:, 3:, :3] = -np.swapaxes(coup, 1, 2)
    elem[:, 3:, 3:] = stiff

    gdof = np.empty((n, 6), dtype=np.int64)
    gdof[:, :3] = table["leaf_edges"]
    gdof[:, 3:] = dofmap.vertex_dof[mesh.leaf_vertices()]

    rows = np.repeat(gdof, 6, axis=1).ravel()
    cols = np.tile(gdof, (1, 6)).ravel()
    vals = elem.ravel()
    keep = (rows >= 0) & (cols >= 0)
    matrix = sp.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])),
        shape=(dofmap.ndof, dofmap.ndof)).tocsr()

    intf, _ = problem.element_integrals(mesh)
    rhs = np.zeros(dofmap.ndof)
    np.add.at(rhs, table["leaf_edges"].ravel(), (-d * intf[:, None]).ravel())

    return SparseSystem(matrix=matrix, rhs=rhs,
                        f_norm_sq=problem.f_norm_sq, dofmap=dofmap)


def solve(system: SparseSystem, method: str = "auto",
          residual_tol: float = 1e-10) -> Solution:
    """Solve the SPD system to a relative residual of at most 1e-10."""
    A, b = system.matrix, system.rhs
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros_like(b)
    else:
        x = None
        if method in ("auto", "direct"):
            try:
                lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
                x = lu.solve(b)
            except RuntimeError as exc:
                if method == "direct":
                    raise FEMError(f"sparse factorization failed: {exc}")
                x = None
        if x is None or np.linalg.norm(A @ x - b) > residual_tol * bnorm:
            diag = A.diagonal()
            if np.any(diag <= 0.0):
                raise FEMError("system matrix is not positive definite")
            precond = sp.diags(1.0 / diag)
            x0 = x if x is not None else np.zeros_like(b)
            x, info = spla.cg(A, b, x0=x0, rtol=1e-13, atol=0.0,
                              maxiter=20 * b.size, M=precond)
            if info != 0:
                raise FEMError(f"CG fallback did not converge (info={info})")
        rel = np.linalg.norm(A @ x - b) / bnorm
        if rel > residual_tol:
            raise FEMError(f"solver residual {rel:.2e} exceeds {residual_tol}")

    dofmap = system.dofmap
    u_vertex = np.zeros(dofmap.vertex_dof.shape[0])
    interior = dofmap.vertex_dof >= 0
    u_vertex[interior] = x[dofmap.vertex_dof[interior]]
    return Solution(p_coeffs=x[:dofmap.n_edges].copy(),
                    u_vertex=u_vertex, dofmap=dofmap)


def evaluate_fields(mesh, solution: Solution):
    """Per-leaf constant fields: div p and grad u; plus a flux evaluator.

    Returns (div_p (n,), grad_u (n, 2), p_at) where p_at(pts) evaluates the
    RT0 flux at points of shape (n, q, 2) given per leaf.
    """
    c, table, areas, elen, sign, grads = _element_geometry(mesh)
    pe = solution.p_coeffs[table["leaf_edges"]]       # (n, 3)
    d = sign * elen / areas[:, None]
    coef = sign * elen / (2.0 * areas[:, None])
    div_p = np.sum(pe * d, axis=1)
    uv = solution.u_vertex[mesh.leaf_vertices()]      # (n, 3)
    grad_u = np.einsum("ni,nix->nx", uv, grads)

    pc = pe * coef

    def p_at(pts):
        diffs = pts[:, :, None, :] - c[:, None, :, :]
        return np.einsum("ni,nqix->nqx", pc, diffs)

    return div_p, grad_u, p_at


def flux_grad_mismatch_sq(mesh, solution: Solution, k: int = 2) -> np.ndarray:
    """Per-leaf ||p - grad u||^2_{L2(T)}, integrated exactly for k >= 2."""
    rule = conical_rule(k)
    c = mesh.leaf_coords()
    areas = mesh.leaf_areas()
    jac = np.stack((c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=2)
    pts = np.einsum("qj,nij->nqi", rule.points, jac) + c[:, None, 0]
    w = rule.weights[None, :] * (2.0 * areas)[:, None]
    div_p, grad_u, p_at = evaluate_fields(mesh, solution)
    mismatch = p_at(pts) - grad_u[:, None, :]
    return np.einsum("nq,nqx,nqx->n", w, mismatch, mismatch)


def ls_functional(mesh, solution: Solution, problem):
    """Both terms of LS(f; p, u) and their sum, integrated elementwise.

    Returns (div_term, grad_term, total) with
    div_term = ||f + div p||^2 and grad_term = ||p - grad u||^2.
    """
    intf, intf2 = problem.element_integrals(mesh)
    areas = mesh.leaf_areas()
    div_p, _, _ = evaluate_fields(mesh, solution)
    div_term = float(np.sum(intf2 + 2.0 * div_p * intf
                            + areas * div_p ** 2))
    grad_term = float(np.sum(flux_grad_mismatch_sq(mesh, solution)))
    return div_term, grad_term, div_term + grad_term


def project_p0(intf: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """L2 projection of f onto piecewise constants from element integrals."""
    return intf / areas


def l2_err_p0_sq(intf: np.ndarray, intf2: np.ndarray,
                 areas: np.ndarray) -> np.ndarray:
    """Per-element ||(1 - Pi) f||^2, clamped at 0 against round-off."""
    return np.maximum(intf2 - intf ** 2 / areas, 0.0)


def normal_jump_p(mesh, solution: Solution) -> np.ndarray:
    """Max normal-component jump of the flux per interior edge (conformity)."""
    table = mesh.edge_table()
    interior = ~table["boundary"]
    c = mesh.leaf_coords()
    areas = mesh.leaf_areas()
    elen = table["length"][table["leaf_edges"]]
    sign = table["leaf_sign"]
    coef = sign * elen / (2.0 * areas[:, None]) * \
        solution.p_coeffs[table["leaf_edges"]]
    coords = mesh.vertex_coords()
    everts = table["verts"][interior]
    nrm = table["normal"][interior]
    tp = table["leaves"][interior, 0]
    tm = table["leaves"][interior, 1]
    jumps = []
    for s in (0.21132486540518708, 0.7886751345948129):
        pt = (1 - s) * coords[everts[:, 0]] + s * coords[everts[:, 1]]
        vp = np.einsum("ei,eix->ex", coef[tp], pt[:, None, :] - c[tp])
        vm = np.einsum("ei,eix->ex", coef[tm], pt[:, None, :] - c[tm])
        jumps.append(np.abs(np.sum((vp - vm) * nrm, axis=1)))
    return np.maximum(*jumps) if jumps else np.zeros(0)
