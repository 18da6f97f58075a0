"""Marking and refinement policy: Doerfler marking, separate marking with
the data-approximation algorithm, and the three adaptive loops."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import benchmarks, estimators, fem, mesh as mesh_mod

MU_MAX = "mu-max"
MU_TILDE_MAX = "mu-tilde-max"

ALGORITHMS = ("nalsfem", "calsfem", "salsfem", "uniform")


class AdaptivityError(RuntimeError):
    pass


@dataclass
class AdaptiveParams:
    theta: float = 0.5
    kappa: float = 1.0
    rho: float = 0.8
    varrho: float = 1.0 - 1e-6
    max_ndof: int = 1_000_000
    time_budget_sec: float = 1800.0
    quad_k: int = 5
    refine_mode: str | None = None  # None: per-algorithm default
    aa_threshold: str = MU_MAX
    aa_max_leaves: int = 20_000_000
    solver: str = "auto"

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not 0.0 < self.varrho < 1.0:
            raise ValueError("varrho must lie in (0, 1)")
        if self.aa_threshold not in (MU_MAX, MU_TILDE_MAX):
            raise ValueError(f"unknown aa threshold {self.aa_threshold!r}")


@dataclass
class MarkingDecision:
    case: str                      # "A" or "B"
    marked: np.ndarray | None      # leaf positions (Case A)
    tolerance: float | None        # target for the data approximation (Case B)
    quotient_sq: float             # mu^2 / eta_SEP^2


@dataclass
class RunRecord:
    level: int
    case: str
    n_triangles: int
    ndof: int
    eta_nat: float
    eta_sep: float
    eta_col: float
    mu: float
    osc: float
    ls_value: float
    err_grad: float | None
    err_flux_l2: float | None
    err_flux_div: float | None
    t_solve: float = 0.0
    t_estimate: float = 0.0
    t_mark: float = 0.0
    t_refine: float = 0.0


def dorfler_mark(values_sq: np.ndarray, theta: float) -> np.ndarray:
    """Exact-minimal Doerfler set as positions into the indicator array.

    Sorts descending (ties broken by ascending position) and takes the
    shortest prefix whose sum reaches theta times the total.  An all-zero
    input yields the empty set.
    """
    values_sq = np.asarray(values_sq, dtype=float)
    total = float(np.sum(values_sq))
    if total <= 0.0:
        return np.empty(0, dtype=np.int64)
    if theta >= 1.0:
        return np.arange(values_sq.size, dtype=np.int64)
    order = np.lexsort((np.arange(values_sq.size), -values_sq))
    csum = np.cumsum(values_sq[order])
    k = int(np.searchsorted(csum, theta * total, side="left"))
    k = min(k, values_sq.size - 1)
    return np.sort(order[: k + 1])


def separate_mark(mu_report, eta_sep_report, theta: float, kappa: float,
                  rho: float) -> MarkingDecision:
    """Case split of the separate marking strategy.

    Case A (mu^2 <= kappa eta_SEP^2): Doerfler set on the residual
    estimator.  Case B: tolerance rho * mu for the data approximation.
    """
    mu_sq = mu_report.total_sq
    eta_sq = eta_sep_report.total_sq
    quotient_sq = mu_sq / eta_sq if eta_sq > 0.0 else math.inf
    if mu_sq <= kappa * eta_sq:
        marked = dorfler_mark(eta_sep_report.per_triangle, theta)
        return MarkingDecision(case="A", marked=marked, tolerance=None,
                               quotient_sq=quotient_sq)
    tol = rho * math.sqrt(mu_sq)
    return MarkingDecision(case="B", marked=None, tolerance=tol,
                           quotient_sq=quotient_sq)


def approximation_algorithm(mesh, tol: float, varrho: float = 1.0 - 1e-6,
                            threshold: str = MU_MAX,
                            max_leaves: int = 20_000_000) -> None:
    """Reduce the data error of the mesh below tol by thresholded bisection.

    Operates on the refinement-history forest directly; intermediate
    states may be nonconforming, a final completion pass restores
    conformity.  Each sweep bisects every leaf K whose modified indicator
    mu_tilde(K) reaches varrho times the maximal leaf data error (or the
    maximal mu_tilde, depending on the threshold switch).
    """
    if tol < 0.0:
        raise ValueError("tolerance must be nonnegative")
    node_mu = mesh.node_mu
    node_mt = mesh.node_mutilde
    leaves = mesh.leaves()
    total_sq = math.fsum(node_mu[t] ** 2 for t in leaves)
    # lazy max-heaps over the leaves; stale entries skipped on pop
    heap_mu = [(-node_mu[t], t) for t in leaves]
    heap_mt = [(-node_mt[t], t) for t in leaves]
    heapq.heapify(heap_mu)
    heapq.heapify(heap_mt)

    def peek_max(heap):
        while heap:
            value, nid = heap[0]
            if mesh.is_leaf(nid):
                return -value
            heapq.heappop(heap)
        return 0.0

    # the incremental total can drift below zero once mu is fully resolved
    while math.sqrt(max(total_sq, 0.0)) > tol:
        if len(mesh._leaf_set) > max_leaves:
            raise AdaptivityError(
                f"data approximation exceeded {max_leaves} leaves "
                f"without reaching tolerance {tol}")
        ref = peek_max(heap_mu if threshold == MU_MAX else heap_mt)
        thr = varrho * ref
        marked = []
        while heap_mt:
            value, nid = heap_mt[0]
            if not mesh.is_leaf(nid):
                heapq.heappop(heap_mt)
                continue
            if -value >= thr and thr > 0.0:
                heapq.heappop(heap_mt)
                marked.append(nid)
            else:
                break
        if not marked:
            # round-off guard: force progress on the largest indicator
            ref_mt = peek_max(heap_mt)
            if not heap_mt or ref_mt <= 0.0:
                raise AdaptivityError(
                    "no positive refinement indicator left while the data "
                    f"error {math.sqrt(total_sq):.3e} exceeds {tol:.3e}")
            marked.append(heapq.heappop(heap_mt)[1])
        for nid in marked:
            c1, c2 = mesh.bisect(nid)
            total_sq += (node_mu[c1] ** 2 + node_mu[c2] ** 2
                         - node_mu[nid] ** 2)
            heapq.heappush(heap_mu, (-node_mu[c1], c1))
            heapq.heappush(heap_mu, (-node_mu[c2], c2))
            heapq.heappush(heap_mt, (-node_mt[c1], c1))
            heapq.heappush(heap_mt, (-node_mt[c2], c2))
    mesh.completion()


def _default_mode(algorithm: str) -> str:
    # NALSFEM's convergence theory assumes all edges of marked triangles
    # are bisected; the collective/separate algorithms use plain NVB
    return mesh_mod.BISEC3 if algorithm in ("nalsfem", "uniform") \
        else mesh_mod.REFINEMENT_EDGE


def adaptive_loop(algorithm: str, problem, params: AdaptiveParams,
                  observer=None) -> list:
    """Solve-estimate-mark-refine loop for one of the three algorithms.

    Returns the per-level RunRecord list.  The optional observer is called
    with (level, mesh, solution) after each solve, e.g. for mesh dumps.
    """
    algorithm = algorithm.lower()
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    theta = 1.0 if algorithm == "uniform" else params.theta
    mode = params.refine_mode or _default_mode(algorithm)
    needs_payload = algorithm == "salsfem"
    mesh = mesh_mod.initial_mesh(
        problem.domain,
        mu_evaluator=problem.mu_evaluator if needs_payload else None)

    records = []
    start = time.perf_counter()
    level = 0
    while True:
        try:
            t0 = time.perf_counter()
            system = fem.assemble(mesh, problem)
            solution = fem.solve(system, method=params.solver)
            t_solve = time.perf_counter() - t0

            t0 = time.perf_counter()
            nat = estimators.eta_nat(mesh, solution, problem)
            sep = estimators.eta_sep(mesh, solution)
            col = estimators.eta_col(mesh, solution, problem, sep_report=sep)
            mu_rep = estimators.mu(mesh, problem)
            osc_rep = estimators.osc(mesh, problem)
            if problem.exact_solution is not None:
                errs = benchmarks.exact_errors(problem, solution, mesh,
                                               k=params.quad_k)
            else:
                errs = (None, None, None)
            t_estimate = time.perf_counter() - t0
        except (fem.FEMError, mesh_mod.MeshError) as exc:
            raise AdaptivityError(f"level {level}: {exc}") from exc

        if theta >= 1.0:
            case = "uniform"
        elif algorithm == "salsfem":
            case = "A" if mu_rep.total_sq <= params.kappa * sep.total_sq \
                else "B"
        else:
            case = "A"
        record = RunRecord(
            level=level, case=case,
            n_triangles=len(mesh.leaves()), ndof=mesh.ndof(),
            eta_nat=nat.total, eta_sep=sep.total, eta_col=col.total,
            mu=mu_rep.total, osc=osc_rep.total, ls_value=nat.total_sq,
            err_grad=errs[0], err_flux_l2=errs[1], err_flux_div=errs[2],
            t_solve=t_solve, t_estimate=t_estimate)
        records.append(record)
        if observer is not None:
            observer(level, mesh, solution)

        if record.ndof >= params.max_ndof:
            break
        if time.perf_counter() - start > params.time_budget_sec:
            break

        t0 = time.perf_counter()
        decision = None
        if theta >= 1.0:
            marked = np.arange(len(mesh.leaves()), dtype=np.int64)
        elif algorithm == "nalsfem":
            marked = dorfler_mark(nat.per_triangle, theta)
        elif algorithm == "calsfem":
            marked = dorfler_mark(col.per_triangle, theta)
        else:
            decision = separate_mark(mu_rep, sep, theta, params.kappa,
                                     params.rho)
            marked = decision.marked
        record.t_mark = time.perf_counter() - t0

        t0 = time.perf_counter()
        try:
            if decision is not None and decision.case == "B":
                approximation_algorithm(
                    mesh, decision.tolerance, varrho=params.varrho,
                    threshold=params.aa_threshold,
                    max_leaves=params.aa_max_leaves)
            else:
                leaf_ids = mesh.leaves()
                mesh.refine([leaf_ids[i] for i in marked], mode=mode)
        except mesh_mod.MeshError as exc:
            raise AdaptivityError(f"level {level}: {exc}") from exc
        record.t_refine = time.perf_counter() - t0
        level += 1
    return records
