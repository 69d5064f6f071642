from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from stragcode.decoder import Checker
from stragcode.designs import DesignSet, check_cross_intersection, kirkman_classes
from stragcode.metrics import (BudgetExceeded, MetricsMismatch, SchemeMetrics, analytic_for_plan,
                               analytic_metrics, compute_metrics, kappa_min, lower_bound_q_ratio,
                               lower_bound_q_uncoded, metrics_rows, oracle_q, oracle_q_exhaustive,
                               oracle_straggler_resilience, scs_identity_holds,
                               worst_case_condition_number)
from stragcode.schemes import (RegimeError, build_beta_matmat, build_beta_matvec,
                               build_coded_bottom_matvec, build_dense_random_baseline,
                               build_scs_matmat, build_scs_matvec)


# ----------------------------------------------------------- closed forms

def test_uncoded_bound_examples():
    assert lower_bound_q_uncoded(5, 3, 3) == 10
    assert lower_bound_q_uncoded(7, 1, 1) == 7
    assert lower_bound_q_uncoded(30, 3, 3) == 85
    with pytest.raises(RegimeError):
        lower_bound_q_uncoded(5, 0, 3)


def test_bound_ratio_form():
    # n = 5, gamma = 3/5, delta = 5
    assert lower_bound_q_ratio(5, "3/5", 5) * 5 == 10


def test_analytic_fig3():
    m = analytic_metrics("beta_matvec", n=12, gamma="1/4", beta=3)
    assert (m.s_analytic, m.q_analytic, m.delta) == (6, 25, 12)


def test_analytic_fig6():
    m = analytic_metrics("beta_matmat", n=36, gamma_a="1/3", gamma_b="1/3", beta_a=2, beta_b=2)
    assert (m.s_analytic, m.q_analytic) == (12, 117)


def test_analytic_coded_bottom_matmat():
    m = analytic_metrics("coded_bottom_matmat", n=12, a2=3, a_u=1, a_c=1, b1=3, b2=4, m=1)
    assert m.params["kappa_min"] == 2 and m.params["tau"] == 5 and m.s_analytic == 7
    assert kappa_min(3, 1, 1, 3) == 2


def test_analytic_scs_matmat():
    m = analytic_metrics("scs_matmat", n=5, k_a=2, k_b=2)
    assert (m.q_analytic, m.s_analytic) == (21, 1)
    assert m.q_over_delta == Fraction(21, 20)


def test_analytic_beta_over_c():
    # c = 2 < beta = 3 still has a closed form
    m = analytic_metrics("beta_matvec", n=6, gamma="1/3", beta=3)
    plan = build_beta_matvec(6, "1/3", 3)
    assert m.s_analytic == oracle_straggler_resilience(plan)
    assert m.q_analytic == oracle_q_exhaustive(plan)


def test_regime_errors_name_the_condition():
    with pytest.raises(RegimeError, match="c >= beta"):
        analytic_metrics("beta_matvec", n=6, gamma="1/3", beta=3, design="multi")
    with pytest.raises(RegimeError, match="k_A\\*k_B <= n"):
        analytic_metrics("scs_matmat", n=5, k_a=3, k_b=2)
    with pytest.raises(RegimeError, match="ell_u >= 1"):
        analytic_metrics("coded_bottom_matvec", n=5, gamma_u="0", gamma_c="2/5")
    with pytest.raises(RegimeError, match="no closed form"):
        analytic_metrics("nope", n=3)


def test_metric_mismatch_is_loud():
    m = SchemeMetrics("x", 4, 4, s_analytic=2, s_oracle=1)
    with pytest.raises(MetricsMismatch):
        m.check()


@pytest.mark.parametrize("n,ka,kb", [(5, 2, 2), (24, 4, 5), (7, 2, 3), (12, 3, 4), (9, 1, 2)])
def test_scs_identity(n, ka, kb):
    assert scs_identity_holds(n, ka, kb)


# ---------------------------------------------------------------- oracles

def test_fig4_oracle():
    plan = build_beta_matvec(5, "3/5", 1)
    assert oracle_straggler_resilience(plan) == 2
    assert oracle_q(plan) == 10


def test_fig5_oracle():
    plan = build_coded_bottom_matvec(5, "2/5", "1/5")
    assert oracle_straggler_resilience(plan) == 3


def test_fig9_oracle():
    plan = build_scs_matvec(6, 4)
    assert oracle_q(plan) == 12 == plan.delta


def test_fig3_structure_aware():
    plan = build_beta_matvec(12, "1/4", 3)
    assert oracle_q(plan, "structure-aware") == 25


def test_structure_aware_matches_exhaustive_n8():
    plan = build_beta_matvec(8, "1/4", 2)
    q = oracle_q(plan, "exhaustive")
    assert q == oracle_q(plan, "structure-aware") == 13
    assert Fraction(q, plan.delta) == Fraction(13, 8)


def test_kirkman_n20():
    designs = kirkman_classes().select(range(4))
    check_cross_intersection(designs)
    plan = build_beta_matvec(20, "1/5", 3, designs)
    m = analytic_for_plan(plan)
    assert m.s_lower == 10
    assert oracle_straggler_resilience(plan) >= 10


@pytest.mark.parametrize("n,gamma", [(5, "3/5"), (6, "1/2"), (6, "1/3"), (4, "3/4"), (8, "1/4")])
def test_uncoded_bound_met_by_cyclic(n, gamma):
    plan = build_beta_matvec(n, gamma, 1)
    r = n * plan.ell // plan.delta
    assert oracle_q(plan) == lower_bound_q_uncoded(plan.delta, r, plan.ell)


def test_uncoded_bound_holds_for_other_layouts():
    # every layout with each symbol replicated r times, n = delta = 4, ell = 2
    from stragcode.blockmat import CoefficientVector
    from stragcode.schemes import EncodingPlan, WorkerStore
    bound = lower_bound_q_uncoded(4, 2, 2)
    seen = 0
    for rows in product([(a, b) for a in range(4) for b in range(4) if a != b], repeat=4):
        flat = [s for r in rows for s in r]
        if sorted(flat) != [0, 0, 1, 1, 2, 2, 3, 3]:
            continue
        workers = tuple(WorkerStore(tuple(CoefficientVector.unit(4, s) for s in r)) for r in rows)
        plan = EncodingPlan("matvec", 4, 4, 1, 2, workers, "custom", 0)
        assert oracle_q(plan) >= bound
        seen += 1
    assert seen > 100


@pytest.mark.parametrize("make", [
    lambda s: build_beta_matvec(8, "1/4", 2, seed=s),
    lambda s: build_beta_matmat(8, "1/2", "1/2", 2, 1, seed=s),
    lambda s: build_scs_matmat(5, 2, 2, seed=s),
    lambda s: build_dense_random_baseline(6, 2, 2, seed=s),
])
def test_q_invariant_to_reseeding(make):
    qs = {oracle_q(make(s), checker=Checker(make(s), "prime")) for s in range(5)}
    assert len(qs) == 1


CROSS12 = DesignSet.from_lists(12, [[(0, 1, 2), (3, 4, 5), (6, 7, 8), (9, 10, 11)],
                                    [(0, 3, 6), (1, 4, 9), (2, 7, 10), (5, 8, 11)],
                                    [(0, 4, 8), (1, 5, 10), (2, 6, 11), (3, 7, 9)]])


@pytest.mark.parametrize("n,gamma,designs", [
    (12, "1/4", CROSS12),
    (15, "1/5", kirkman_classes().select(range(3))),
    (20, "1/5", kirkman_classes().select(range(4))),
    (20, "1/5", kirkman_classes().select([6, 2, 4, 1])),
])
def test_multi_class_bound(n, gamma, designs):
    check_cross_intersection(designs)
    plan = build_beta_matvec(n, gamma, 3, designs)
    assert oracle_straggler_resilience(plan) >= analytic_for_plan(plan).s_lower


def test_budget_guard():
    plan = build_beta_matvec(20, "1/5", 3)
    with pytest.raises(BudgetExceeded):
        oracle_q_exhaustive(plan, budget=1000)
    with pytest.raises(BudgetExceeded):
        worst_case_condition_number(plan, 10, budget=1000)


# ------------------------------------------------------- condition numbers

def test_worst_kappa_uncoded_n30():
    plan = build_beta_matvec(30, "1/10", 1)
    assert worst_case_condition_number(plan, 2) == pytest.approx(np.sqrt(3), abs=1e-3)


def test_worst_kappa_trivial():
    plan = build_beta_matvec(1, "1", 1)
    assert worst_case_condition_number(plan, 0) == 1.0


def test_worst_kappa_beta2_above_uncoded():
    un = build_beta_matvec(8, "1/4", 1)
    b2 = build_beta_matvec(8, "1/4", 2)
    k_un = worst_case_condition_number(un, analytic_for_plan(un).s_analytic)
    k_b2 = worst_case_condition_number(b2, analytic_for_plan(b2).s_analytic)
    assert np.isfinite(k_b2) and k_b2 > k_un


def test_worst_kappa_reports_the_set():
    plan = build_beta_matvec(5, "3/5", 1)
    k, dead = worst_case_condition_number(plan, 3, return_set=True)
    assert k == float("inf") and len(dead) == 3


# -------------------------------------------------------------- reporting

def test_compute_metrics_agree_fig3():
    m = compute_metrics(build_beta_matvec(12, "1/4", 3))
    assert m.oracle_method == "structure-aware"
    assert (m.s_oracle, m.q_oracle) == (6, 25) and not m.mismatches()


def test_compute_metrics_kappa_and_csv():
    m = compute_metrics(build_scs_matvec(6, 4), kappa=True)
    assert m.q_over_delta == 1 and m.kappa_worst > 1
    text = metrics_rows([m])
    head, row = text.strip().splitlines()
    assert head.startswith("scheme_id,n,params")
    assert "scs_matvec" in row and "1" in row.split(",")
