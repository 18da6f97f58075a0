import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alsfem import adaptivity, benchmarks, estimators, fem, mesh as mesh_mod
from alsfem.adaptivity import (AdaptiveParams, AdaptivityError,
                               adaptive_loop, approximation_algorithm,
                               dorfler_mark, separate_mark)


# ---------------------------------------------------------------- marking

def _brute_force_minimal(values_sq, theta):
    """Smallest cardinality subset reaching the bulk criterion, by search."""
    total = values_sq.sum()
    slack = 1e-12 * total
    n = len(values_sq)
    for r in range(n + 1):
        for combo in itertools.combinations(range(n), r):
            if sum(values_sq[i] for i in combo) >= theta * total - slack:
                return r
    return None


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(0.0, 100.0, allow_subnormal=False),
                min_size=1, max_size=12),
       st.floats(0.05, 0.99))
def test_dorfler_exhaustive_minimality(values, theta):
    values_sq = np.asarray(values)
    marked = dorfler_mark(values_sq, theta)
    total = values_sq.sum()
    if total == 0.0:
        assert marked.size == 0
        return
    # bulk criterion holds
    assert values_sq[marked].sum() >= theta * total - 1e-12 * total
    # cardinality is minimal
    assert marked.size == _brute_force_minimal(values_sq, theta)


def test_dorfler_theta_one_marks_everything():
    marked = dorfler_mark(np.array([1.0, 0.0, 2.0]), 1.0)
    assert np.array_equal(marked, [0, 1, 2])


def test_dorfler_picks_largest_first():
    marked = dorfler_mark(np.array([1.0, 8.0, 2.0, 5.0]), 0.5)
    assert np.array_equal(marked, [1])
    marked = dorfler_mark(np.array([1.0, 8.0, 2.0, 5.0]), 0.75)
    assert np.array_equal(np.sort(marked), [1, 3])


def test_dorfler_tie_break_is_stable():
    marked = dorfler_mark(np.array([3.0, 3.0, 3.0]), 0.34)
    assert np.array_equal(marked, [0, 1])


def test_separate_mark_case_split():
    mu_rep = estimators.EstimatorReport.from_values("MU", np.array([4.0]))
    sep_rep = estimators.EstimatorReport.from_values("SEP", np.array([16.0]))
    dec = separate_mark(mu_rep, sep_rep, theta=0.5, kappa=1.0, rho=0.8)
    assert dec.case == "A"
    assert dec.quotient_sq == pytest.approx(0.25)
    dec = separate_mark(mu_rep, sep_rep, theta=0.5, kappa=0.2, rho=0.8)
    assert dec.case == "B"
    assert dec.tolerance == pytest.approx(0.8 * 2.0)


def test_params_validation():
    with pytest.raises(ValueError):
        AdaptiveParams(theta=0.0)
    with pytest.raises(ValueError):
        AdaptiveParams(theta=1.5)
    with pytest.raises(ValueError):
        AdaptiveParams(kappa=-1.0)
    with pytest.raises(ValueError):
        AdaptiveParams(rho=1.0)
    with pytest.raises(ValueError):
        AdaptiveParams(varrho=0.0)
    with pytest.raises(ValueError):
        AdaptiveParams(aa_threshold="biggest")


# ------------------------------------------------- approximation algorithm

def _micro_mesh(eps=0.25):
    problem = benchmarks.MicrostructureProblem(eps)
    return mesh_mod.initial_mesh("l_shape",
                                 mu_evaluator=problem.mu_evaluator), problem


def _mu_total(mesh):
    return math.sqrt(float(np.sum(mesh.leaf_mu() ** 2)))


def test_aa_reaches_tolerance():
    m, _ = _micro_mesh()
    tol = 0.25 * _mu_total(m)
    approximation_algorithm(m, tol)
    assert _mu_total(m) <= tol
    assert m.is_conforming()


def test_aa_mu_tilde_threshold_variant():
    m, _ = _micro_mesh()
    tol = 0.25 * _mu_total(m)
    approximation_algorithm(m, tol, threshold=adaptivity.MU_TILDE_MAX)
    assert _mu_total(m) <= tol
    assert m.is_conforming()


def test_aa_zero_tolerance_on_resolvable_data():
    # eps = 0.25: the support edges align with mesh lines after a few
    # bisections, so mu -> 0 exactly
    m, _ = _micro_mesh(eps=0.25)
    approximation_algorithm(m, 1e-12)
    assert _mu_total(m) <= 1e-12


def test_aa_rejects_negative_tolerance():
    m, _ = _micro_mesh()
    with pytest.raises(ValueError):
        approximation_algorithm(m, -1.0)


def test_aa_leaf_budget():
    m, _ = _micro_mesh(eps=1.0 / 3.0 ** 5)
    with pytest.raises(AdaptivityError):
        approximation_algorithm(m, 1e-9, max_leaves=500)


def test_mu_square_sum_decreases_under_bisection():
    """Children's mu^2 never exceed the parent's (best-approximation)."""
    m, _ = _micro_mesh(eps=0.2)
    rng = np.random.default_rng(23)
    for _ in range(60):
        leaves = m.leaves()
        nid = leaves[rng.integers(len(leaves))]
        parent_sq = m.node_mu[nid] ** 2
        c1, c2 = m.bisect(nid)
        child_sq = m.node_mu[c1] ** 2 + m.node_mu[c2] ** 2
        assert child_sq <= parent_sq + 1e-15
    m.completion()
    assert m.is_conforming()


def test_mutilde_between_zero_and_mu_sum():
    m, _ = _micro_mesh(eps=0.3)
    approximation_algorithm(m, 0.3 * _mu_total(m))
    mu = m.leaf_mu()
    mt = m.leaf_mutilde()
    assert np.all(mt >= -1e-15)
    # the recursion caps mu_tilde by the sibling-sum it distributes
    for nid in range(len(m.node_verts)):
        ch = m.node_children[nid]
        if ch is None:
            continue
        c1, c2 = ch
        denom = m.node_mu[nid] + m.node_mutilde[nid]
        if denom > 0:
            expected = (m.node_mu[c1] + m.node_mu[c2]) \
                * m.node_mutilde[nid] / denom
            assert m.node_mutilde[c1] == pytest.approx(expected)


# ------------------------------------------------------------- full loops

def test_unknown_algorithm_rejected():
    with pytest.raises(ValueError):
        adaptive_loop("bogus", benchmarks.LShapeProblem(), AdaptiveParams())


def test_uniform_leaf_counts_quadruple():
    params = AdaptiveParams(theta=1.0, max_ndof=2000)
    recs = adaptive_loop("uniform", benchmarks.LShapeProblem(), params)
    counts = [r.n_triangles for r in recs]
    assert counts == [6 * 4 ** i for i in range(len(counts))]
    assert all(r.case == "uniform" for r in recs)


def test_loop_monotone_ls_and_growing_ndof():
    params = AdaptiveParams(theta=0.5, max_ndof=3000)
    recs = adaptive_loop("nalsfem", benchmarks.LShapeProblem(), params)
    assert recs[-1].ndof >= 3000
    for a, b in zip(recs, recs[1:]):
        assert b.ndof > a.ndof
        assert b.ls_value <= a.ls_value + 1e-10
        assert b.level == a.level + 1


def test_loop_records_are_consistent():
    params = AdaptiveParams(theta=0.5, max_ndof=2000)
    recs = adaptive_loop("calsfem", benchmarks.MicrostructureProblem(0.25),
                         params)
    for r in recs:
        assert r.eta_nat == pytest.approx(math.sqrt(r.ls_value), rel=1e-12)
        assert r.eta_col >= r.eta_sep
        assert r.osc <= r.mu * math.sqrt(3.0)  # areas bounded by |Omega|
        assert r.t_solve >= 0 and r.t_estimate >= 0
        # no exact solution on this benchmark
        assert r.err_grad is None


def test_salsfem_case_column_matches_quotient():
    params = AdaptiveParams(theta=0.3, max_ndof=3000)
    recs = adaptive_loop("salsfem", benchmarks.MicrostructureProblem(0.25),
                         params)
    cases = {r.case for r in recs}
    assert cases <= {"A", "B"}
    assert recs[0].case == "B"  # coarse mesh: data error dominates


def test_observer_called_every_level():
    seen = []
    params = AdaptiveParams(theta=0.5, max_ndof=500)
    adaptive_loop("nalsfem", benchmarks.LShapeProblem(), params,
                  observer=lambda level, mesh, sol: seen.append(
                      (level, len(mesh.leaves()))))
    assert [lv for lv, _ in seen] == list(range(len(seen)))
    assert len(seen) >= 2


def test_time_budget_stops_loop():
    params = AdaptiveParams(theta=0.5, max_ndof=10 ** 9,
                            time_budget_sec=0.0)
    recs = adaptive_loop("nalsfem", benchmarks.LShapeProblem(), params)
    assert len(recs) == 1


def test_waterfall_records_exact_errors():
    params = AdaptiveParams(theta=0.5, max_ndof=800)
    recs = adaptive_loop("calsfem", benchmarks.WaterfallProblem(), params)
    for r in recs:
        assert r.err_grad is not None and r.err_grad > 0
        assert r.err_flux_l2 is not None
        assert r.err_flux_div is not None
