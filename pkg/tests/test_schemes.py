from collections import Counter
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stragcode.designs import shifted_pair_classes, trivial_classes
from stragcode.metrics import oracle_q_exhaustive
from stragcode.schemes import (EncodingPlan, RegimeError, build_beta_matmat, build_beta_matvec,
                               build_coded_bottom_matmat, build_coded_bottom_matvec,
                               build_dense_random_baseline, build_polynomial_baseline,
                               build_scs_matmat, build_scs_matvec, load_plan, save_plan)


def supports(plan, i, side="a"):
    return [set(c.support) for c in getattr(plan.workers[i], side)]


def survivors_rank(plan, alive):
    rows = [plan.task_row(t) for i in alive for t in plan.tasks(i)]
    return np.linalg.matrix_rank(np.array(rows))


def test_fig3_worker0():
    plan = build_beta_matvec(12, "1/4", 3)
    assert supports(plan, 0) == [{0, 1, 2}, {3, 4, 5}, {6, 7, 8}]
    assert plan.delta == 12 and plan.ell == 3


def test_uncoded_supports_are_singletons():
    plan = build_beta_matvec(10, "1/5", 1)
    assert all(len(c.support) == 1 and c.values == (1.0,) for w in plan.workers for c in w.a)


def test_shifted_group_one():
    plan = build_beta_matvec(8, "1/4", 2, shifted_pair_classes(8))
    assert supports(plan, 4) == [{0, 5}, {2, 7}]
    assert plan.params["design"] == "shifted"


def test_beta_supports_are_class_blocks():
    plan = build_beta_matvec(15, "2/5", 2)
    blocks = {frozenset(b) for b in trivial_classes(10, 2, 1).classes[0].blocks}
    assert all(frozenset(c.support) in blocks for w in plan.workers for c in w.a)


def test_fig6_worker0():
    plan = build_beta_matmat(36, "1/3", "1/3", 2, 2)
    assert supports(plan, 0, "a") == [{0, 1}, {2, 3}]
    assert supports(plan, 0, "b") == [{0, 1}, {2, 3}]
    assert plan.ell == 4 and plan.delta == 36


def test_fig7_worker0():
    plan = build_beta_matmat(12, "2/3", "3/4", 1, 1)
    assert plan.delta_a == 3 and plan.delta_b == 4
    assert supports(plan, 0, "a") == [{0}, {1}]
    assert supports(plan, 0, "b") == [{0}, {1}, {2}]
    order = [(t.a.support[0], t.b.support[0]) for t in plan.tasks(0)]
    assert order == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]


def test_product_meta_symbols_fill_every_position():
    plan = build_beta_matmat(36, "1/3", "1/3", 2, 2)
    group = 9
    for g in range(4):
        tally = Counter()
        for i in range(g * group, (g + 1) * group):
            for t in plan.tasks(i):
                tally[(frozenset(plan.task_support(t)), t.position)] += 1
        syms = {s for s, _ in tally}
        assert len(syms) == 9
        assert all(tally[(s, p)] == 1 for s in syms for p in range(plan.ell))


def test_fig5_layout():
    plan = build_coded_bottom_matvec(5, "2/5", "1/5")
    assert supports(plan, 0) == [{0}, {1}, {2, 3, 4}]


def test_coded_bottom_without_coding_is_cyclic():
    plan = build_coded_bottom_matvec(6, "1/2", "0")
    for i in range(6):
        assert supports(plan, i) == [{(i + t) % 6} for t in range(3)]


@pytest.mark.parametrize("n,u,c", [(5, 2, 1), (7, 3, 2), (10, 1, 4)])
def test_coded_bottom_support_size(n, u, c):
    plan = build_coded_bottom_matvec(n, f"{u}/{n}", f"{c}/{n}")
    for w in plan.workers:
        assert [len(x.support) for x in w.a] == [1] * u + [n - u] * c


def test_fig8_layout():
    plan = build_coded_bottom_matmat(12, "1/3", "1/3", "3/4")
    assert supports(plan, 0, "a") == [{0}, {1, 2}]
    assert supports(plan, 0, "b") == [{0}, {1}, {2}]
    for w in plan.workers:
        assert len(w.a[1].support) == plan.delta_a - 1


def test_coded_bottom_matmat_without_coding_is_uncoded():
    cb = build_coded_bottom_matmat(12, "2/3", "0", "3/4")
    un = build_beta_matmat(12, "2/3", "3/4", 1, 1)
    for i in range(12):
        assert supports(cb, i, "a") == supports(un, i, "a")
        assert supports(cb, i, "b") == supports(un, i, "b")


def test_fig9_layout():
    plan = build_scs_matvec(6, 4)
    assert plan.delta == 12 and plan.params["ell_c"] == 1
    assert supports(plan, 0)[:2] == [{0}, {1}] and len(supports(plan, 0)) == 3


def test_scs_one_shot_when_k_equals_n():
    plan = build_scs_matvec(4, 4)
    assert plan.params["ell_c"] == 0
    assert all(len(c.support) == 1 for w in plan.workers for c in w.a)


def test_scs_divisible_n_still_codes():
    # delta = n here, so each worker keeps n/k - 1 coded blocks
    plan = build_scs_matvec(8, 4)
    assert plan.delta == 8 and plan.params["ell_c"] == 1


@pytest.mark.parametrize("n,k", [(6, 4), (7, 3), (10, 4), (9, 6)])
def test_scs_uncoded_symbols_once(n, k):
    plan = build_scs_matvec(n, k)
    tops = Counter(c.support[0] for w in plan.workers for c in w.a if len(c.support) == 1)
    assert sorted(tops) == list(range(plan.delta)) and set(tops.values()) == {1}


def test_fig10_layout():
    plan = build_scs_matmat(5, 2, 2)
    assert plan.delta_a == 10 and plan.ell == 5
    w0 = plan.workers[0]
    assert [set(c.support) for c in w0.a[:4]] == [{0}, {1}, {2}, {3}]
    assert len(w0.a) == 5 and len(w0.b) == 1 and set(w0.b[0].support) == {0, 1}


@pytest.mark.parametrize("n,ka,kb", [(5, 2, 2), (24, 4, 5), (7, 2, 3)])
def test_scs_uncoded_a_blocks_k_b_times(n, ka, kb):
    plan = build_scs_matmat(n, ka, kb)
    tally = Counter(c.support[0] for w in plan.workers for c in w.a if len(c.support) == 1)
    assert sorted(tally) == list(range(plan.delta_a)) and set(tally.values()) == {kb}


def test_scs_matmat_coded_count():
    plan = build_scs_matmat(24, 4, 5)
    assert plan.delta_a == 24 and plan.params["ell_c"] == 24 // 4 - 24 * 5 // 24 == 1


def test_polynomial_threshold_four():
    plan = build_polynomial_baseline(5, 2, 2)
    for alive in combinations(range(5), 4):
        assert survivors_rank(plan, alive) == 4
    for alive in combinations(range(5), 3):
        assert survivors_rank(plan, alive) == 3


def test_polynomial_trivial_k():
    plan = build_polynomial_baseline(3, 1, 1, kind="matmat")
    assert all(w.a[0].values == (1.0,) and w.b[0].values == (1.0,) for w in plan.workers)
    assert survivors_rank(plan, [2]) == 1


@pytest.mark.parametrize("n,ka,kb", [(6, 2, 1), (8, 2, 2), (7, 3, 2), (5, 5, 1)])
def test_dense_random_threshold(n, ka, kb):
    plan = build_dense_random_baseline(n, ka, kb)
    k = ka * kb
    assert plan.ell == 1
    for alive in combinations(range(n), k):
        assert survivors_rank(plan, alive) == k
    if k > 1:
        for alive in combinations(range(n), k - 1):
            assert survivors_rank(plan, alive) == k - 1


def test_dense_random_identity_at_one():
    plan = build_dense_random_baseline(3, 1)
    assert survivors_rank(plan, [0]) == 1


@pytest.mark.parametrize("n,k", [(4, 2), (5, 3), (6, 4), (7, 5), (6, 3), (5, 2)])
def test_scs_matvec_hits_delta(n, k):
    plan = build_scs_matvec(n, k)
    assert oracle_q_exhaustive(plan) == plan.delta


def test_regime_errors_name_the_condition():
    with pytest.raises(RegimeError, match="divide"):
        build_beta_matvec(10, "1/4", 2)
    with pytest.raises(RegimeError, match="gamma"):
        build_beta_matvec(8, "1/2", 3)
    with pytest.raises(RegimeError, match="k_A"):
        build_scs_matmat(5, 3, 2)


PLANS = [
    lambda s: build_beta_matvec(12, "1/4", 3, seed=s),
    lambda s: build_beta_matmat(8, "1/2", "1/2", 2, 1, seed=s),
    lambda s: build_coded_bottom_matvec(5, "2/5", "1/5", seed=s),
    lambda s: build_coded_bottom_matmat(12, "1/3", "1/3", "3/4", seed=s),
    lambda s: build_scs_matvec(6, 4, seed=s),
    lambda s: build_scs_matmat(5, 2, 2, seed=s),
    lambda s: build_polynomial_baseline(5, 2, 2),
    lambda s: build_dense_random_baseline(6, 2, 2, seed=s),
]


def same_plan(p, q):
    return p.to_json() == q.to_json()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, len(PLANS) - 1), st.integers(0, 2**31))
def test_determinism_and_round_trip(k, seed):
    p = PLANS[k](seed)
    assert same_plan(p, PLANS[k](seed))
    assert same_plan(EncodingPlan.from_json(p.to_json()), p)


def test_plan_file_round_trip(tmp_path):
    p = build_scs_matmat(5, 2, 2, seed=3)
    save_plan(p, tmp_path / "p.json")
    assert same_plan(load_plan(tmp_path / "p.json"), p)


def test_plan_rejects_untouched_unknowns():
    p = build_beta_matvec(4, "1/4", 1).to_json()
    p["workers"][3]["a"][0] = {"support": [0], "values": [1.0]}
    with pytest.raises(ValueError, match="never touched"):
        EncodingPlan.from_json(p)
