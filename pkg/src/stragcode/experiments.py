"""Experiment configs: building plans from JSON, end-to-end checks, and the
fixed desk-scale tables.

A config is a JSON object. Keys understood here:

  scheme      beta_matvec | beta_matmat | coded_bottom_matvec |
              coded_bottom_matmat | scs_matvec | scs_matmat |
              polynomial | dense_random
  n, seed     worker count and coefficient seed
  scheme parameters, by scheme:
    beta_matvec          gamma, beta, design
    beta_matmat          gamma_a, gamma_b, beta_a, beta_b, design_a, design_b
    coded_bottom_matvec  gamma_u, gamma_c
    coded_bottom_matmat  gamma_au, gamma_ac, gamma_b
    scs_matvec           k_a
    scs_matmat           k_a, k_b
    polynomial           k_a, k_b (default 1), eval_points (optional)
    dense_random         k_a, k_b (default 1)
  design      "single" (default), "shifted", "kirkman", "pair12", a
              {"points", "classes"} object, or a path to such a JSON file
  label       free text used in reports

Commands add their own keys (matrices, speed, trials, ...); see cli.py.
A config file holds either one object or {"configs": [...]}.
"""

from __future__ import annotations

import json
from math import comb
from pathlib import Path

import numpy as np

from .blockmat import BlockPartition, SparseMatrix, encode_block, generate_sparse, spmm_t, spmv_t
from .decoder import Checker, DecodeError, decode
from .designs import DesignSet, kirkman_classes, load_design, shifted_pair_classes
from .metrics import (BudgetExceeded, SchemeMetrics, analytic_for_plan, compute_metrics,
                      worst_case_condition_number)
from .schemes import (EncodingPlan, RegimeError, as_fraction, build_beta_matmat, build_beta_matvec,
                      build_coded_bottom_matmat, build_coded_bottom_matvec,
                      build_dense_random_baseline, build_polynomial_baseline, build_scs_matmat,
                      build_scs_matvec)
from .simulator import Workload, expected_task_cost

# Two classes of triples on 12 points meeting in at most one point; the
# first is the trivial class. Found by search against the exhaustive oracle.
_PAIR12 = (
    ((0, 1, 2), (3, 4, 5), (6, 7, 8), (9, 10, 11)),
    ((0, 3, 6), (1, 4, 9), (2, 7, 10), (5, 8, 11)),
)


def pair12_classes() -> DesignSet:
    return DesignSet.from_lists(12, _PAIR12)


def named_design(spec, delta: int, count: int) -> DesignSet | None:
    if spec is None or spec == "single":
        return None
    if isinstance(spec, dict):
        return DesignSet.from_json(spec)
    if spec == "shifted":
        return shifted_pair_classes(delta)
    if spec == "kirkman":
        return kirkman_classes().select(range(count))
    if spec == "pair12":
        return pair12_classes()
    if isinstance(spec, str) and Path(spec).exists():
        return load_design(spec)
    raise ValueError(f"unknown design {spec!r}")


def load_configs(path) -> list[dict]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict) and "configs" in data:
        return list(data["configs"])
    return [data] if isinstance(data, dict) else list(data)


def build_plan(cfg: dict) -> EncodingPlan:
    sid = cfg["scheme"]
    n = int(cfg["n"])
    seed = int(cfg.get("seed", 0))
    if sid == "beta_matvec":
        gamma, beta = as_fraction(cfg["gamma"]), int(cfg["beta"])
        designs = named_design(cfg.get("design"), beta * gamma.denominator,
                               n // gamma.denominator)
        return build_beta_matvec(n, gamma, beta, designs, seed)
    if sid == "beta_matmat":
        ga, gb = as_fraction(cfg["gamma_a"]), as_fraction(cfg["gamma_b"])
        ba, bb = int(cfg["beta_a"]), int(cfg["beta_b"])
        c = n // (ga.denominator * gb.denominator)
        da = named_design(cfg.get("design_a"), ba * ga.denominator, c)
        db = named_design(cfg.get("design_b"), bb * gb.denominator, c)
        return build_beta_matmat(n, ga, gb, ba, bb, da, db, seed)
    if sid == "coded_bottom_matvec":
        return build_coded_bottom_matvec(n, cfg["gamma_u"], cfg["gamma_c"], seed)
    if sid == "coded_bottom_matmat":
        return build_coded_bottom_matmat(n, cfg["gamma_au"], cfg["gamma_ac"], cfg["gamma_b"], seed)
    if sid == "scs_matvec":
        return build_scs_matvec(n, int(cfg["k_a"]), seed)
    if sid == "scs_matmat":
        return build_scs_matmat(n, int(cfg["k_a"]), int(cfg["k_b"]), seed)
    if sid == "polynomial":
        return build_polynomial_baseline(n, int(cfg["k_a"]), int(cfg.get("k_b", 1)),
                                         cfg.get("eval_points"), cfg.get("kind"))
    if sid == "dense_random":
        return build_dense_random_baseline(n, int(cfg["k_a"]), int(cfg.get("k_b", 1)), seed,
                                           cfg.get("kind"))
    raise RegimeError(f"unknown scheme {sid!r}")


def describe_plan(plan: EncodingPlan) -> str:
    lines = [f"scheme {plan.scheme_id}  kind {plan.kind}  n {plan.n}  "
             f"delta {plan.delta} ({plan.delta_a}x{plan.delta_b})  ell {plan.ell}"]
    for i in range(plan.n):
        sups = [sorted(plan.task_support(t)) for t in plan.tasks(i)]
        lines.append(f"  worker {i}: " + " ".join("{" + ",".join(map(str, s)) + "}" for s in sups))
    return "\n".join(lines)


# ---------------------------------------------------------------- end to end

def task_products(plan: EncodingPlan, a: SparseMatrix, b) -> list[list]:
    """Result of every task on every worker (no straggling applied)."""
    pa = BlockPartition(a.cols, plan.delta_a)
    cache: dict = {}

    def enc(side, coeffs, mat, part):
        key = (side, coeffs)
        if key not in cache:
            cache[key] = encode_block(mat, part, coeffs)
        return cache[key]

    out = []
    if plan.kind == "matvec":
        for i in range(plan.n):
            out.append([spmv_t(enc("a", t.a, a, pa), b) for t in plan.tasks(i)])
        return out
    pb = BlockPartition(b.cols, plan.delta_b)
    for i in range(plan.n):
        out.append([spmm_t(enc("a", t.a, a, pa), enc("b", t.b, b, pb)).to_dense()
                    for t in plan.tasks(i)])
    return out


def random_state(plan: EncodingPlan, total: int, rng: np.random.Generator) -> np.ndarray:
    """A completion state with the given task total, grown one task at a time
    on a uniformly chosen unfinished worker."""
    w = np.zeros(plan.n, dtype=np.int64)
    for _ in range(total):
        open_ = np.flatnonzero(w < plan.ell)
        w[rng.choice(open_)] += 1
    return w


def relative_error(got, want) -> float:
    want = np.asarray(want)
    scale = np.linalg.norm(want)
    return float(np.linalg.norm(np.asarray(got) - want) / (scale if scale > 0 else 1.0))


def e2e_matrices(cfg: dict, plan: EncodingPlan):
    m = cfg.get("matrices", {})
    rows = int(m.get("rows", 600))
    cols_a = int(m.get("cols_a", 480))
    seed = int(m.get("seed", cfg.get("seed", 0)))
    a = generate_sparse(rows, cols_a, float(m.get("density_a", 0.03)), seed)
    if plan.kind == "matvec":
        b = np.random.default_rng(seed + 1).uniform(-1, 1, size=rows)
    else:
        b = generate_sparse(rows, int(m.get("cols_b", 400)), float(m.get("density_b", 0.03)), seed + 1)
    return a, b


def run_e2e(cfg: dict, tol: float = 1e-6, budget: int = 10**6):
    """Yield (scenario, state, kappa, rel_error, passed, message) tuples.

    Scenarios: the worst straggler set of size s (by condition number), the
    explicit "dead" list if given, and "random_states" states with total Q.
    """
    plan = build_plan(cfg)
    a, b = e2e_matrices(cfg, plan)
    want = spmv_t(a, b) if plan.kind == "matvec" else spmm_t(a, b).to_dense()
    products = task_products(plan, a, b)
    ref = analytic_for_plan(plan)
    s, q = cfg.get("s", ref.s_analytic), cfg.get("q", ref.q_analytic)
    scenarios = []
    if s is not None and comb(plan.n, s) <= budget:
        _, dead = worst_case_condition_number(plan, s, budget, return_set=True)
        scenarios.append(("worst_stragglers", [0 if i in dead else plan.ell for i in range(plan.n)]))
    if "dead" in cfg:
        dead = set(cfg["dead"])
        scenarios.append(("dead", [0 if i in dead else plan.ell for i in range(plan.n)]))
    if q is not None:
        rng = np.random.default_rng(int(cfg.get("seed", 0)) + 7)
        for k in range(int(cfg.get("random_states", 20))):
            scenarios.append((f"random_q_{k}", random_state(plan, q, rng).tolist()))
    chk = Checker(plan)
    for name, state in scenarios:
        if not chk(state):
            yield name, state, float("inf"), float("nan"), False, "state not decodable"
            continue
        try:
            got = decode(plan, state, products)
        except DecodeError as exc:
            yield name, state, exc.kappa, exc.residual, False, str(exc)
            continue
        err = relative_error(got, want)
        yield name, state, _state_kappa(plan, state), err, err < tol, ""


def _state_kappa(plan: EncodingPlan, state) -> float:
    from .decoder import assemble
    sv = np.linalg.svd(assemble(plan, state).rows, compute_uv=False)
    return float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")


# -------------------------------------------------------------------- tables

def _mv(scheme, **kw):
    return {"scheme": scheme, **kw}


TABLES: dict[str, list[tuple[str, str, dict]]] = {
    "III": [
        ("n=8 gamma=1/4 beta=2", "dense", _mv("polynomial", n=8, k_a=4)),
        ("n=8 gamma=1/4 beta=2", "single class", _mv("beta_matvec", n=8, gamma="1/4", beta=2)),
        ("n=8 gamma=1/4 beta=2", "multiple classes",
         _mv("beta_matvec", n=8, gamma="1/4", beta=2, design="shifted")),
        ("n=8 gamma=1/4 beta=3", "dense", _mv("polynomial", n=8, k_a=4)),
        ("n=8 gamma=1/4 beta=3", "single class", _mv("beta_matvec", n=8, gamma="1/4", beta=3)),
        ("n=8 gamma=1/4 beta=3", "multiple classes",
         _mv("beta_matvec", n=8, gamma="1/4", beta=3, design="pair12")),
        ("n=10 gamma=1/5 beta=3", "dense", _mv("polynomial", n=10, k_a=5)),
        ("n=10 gamma=1/5 beta=3", "single class", _mv("beta_matvec", n=10, gamma="1/5", beta=3)),
        ("n=10 gamma=1/5 beta=3", "multiple classes",
         _mv("beta_matvec", n=10, gamma="1/5", beta=3, design="kirkman")),
    ],
    "IV-desk": [
        ("n=30 gamma=1/10", "polynomial", _mv("polynomial", n=30, k_a=10)),
        ("n=30 gamma=1/10", "dense random", _mv("dense_random", n=30, k_a=10)),
        ("n=30 gamma=1/10", "uncoded", _mv("beta_matvec", n=30, gamma="1/10", beta=1)),
        ("n=30 gamma=1/10", "beta=2", _mv("beta_matvec", n=30, gamma="1/10", beta=2)),
        ("n=30 gamma=1/10", "beta=3", _mv("beta_matvec", n=30, gamma="1/10", beta=3)),
        ("n=30 gamma=1/10", "coded at bottom",
         _mv("coded_bottom_matvec", n=30, gamma_u="1/15", gamma_c="1/30")),
    ],
    "V": [
        ("n=18 gamma=1/3,1/3", "polynomial", _mv("polynomial", n=18, k_a=3, k_b=3)),
        ("n=18 gamma=1/3,1/3", "dense random", _mv("dense_random", n=18, k_a=3, k_b=3)),
        ("n=18 gamma=1/3,1/3", "uncoded",
         _mv("beta_matmat", n=18, gamma_a="1/3", gamma_b="1/3", beta_a=1, beta_b=1)),
        ("n=18 gamma=1/3,1/3", "beta=2,2",
         _mv("beta_matmat", n=18, gamma_a="1/3", gamma_b="1/3", beta_a=2, beta_b=2)),
    ],
    "VI-desk": [
        ("n=18 gamma=1/15", "polynomial", _mv("polynomial", n=18, k_a=15)),
        ("n=18 gamma=1/15", "dense random", _mv("dense_random", n=18, k_a=15)),
        ("n=18 gamma=1/15", "scs", _mv("scs_matvec", n=18, k_a=15)),
    ],
    "VII-desk": [
        ("n=24 gamma=1/4,1/5", "polynomial", _mv("polynomial", n=24, k_a=4, k_b=5)),
        ("n=24 gamma=1/4,1/5", "dense random", _mv("dense_random", n=24, k_a=4, k_b=5)),
        ("n=24 gamma=1/4,1/5", "scs", _mv("scs_matmat", n=24, k_a=4, k_b=5)),
    ],
}

# the uncoded row each desk table's cost ratios are measured against
_COST_BASE = {"IV-desk": "uncoded", "V": "uncoded", "VI-desk": "scs", "VII-desk": "scs"}
TABLE_DENSITIES = (0.02, 0.05)

TABLE_HEADER = ["table", "system", "method", "scheme_id", "n", "delta", "s", "s_source", "q",
                "q_over_delta", "q_source", "kappa_worst"] + [
                    f"cost_ratio_{int(d * 100)}pct" for d in TABLE_DENSITIES]


def worker_cost(plan: EncodingPlan, work: Workload) -> float:
    """Expected flops of the busiest worker's full task list."""
    return max(sum(expected_task_cost(plan, t, work) for t in plan.tasks(i)) for i in range(plan.n))


def table_metrics(plan: EncodingPlan, budget: int, kappa: bool) -> tuple[SchemeMetrics, str, str]:
    try:
        m = compute_metrics(plan, analytic=True, oracle=True, kappa=False, budget=budget)
        s_src = "oracle" if m.s_oracle is not None else "analytic"
    except BudgetExceeded:
        try:
            m = analytic_for_plan(plan)
        except RegimeError:
            m = SchemeMetrics(plan.scheme_id, plan.n, plan.delta, dict(plan.params))
        m.oracle_method = None
        s_src = "analytic"
    q_src = "oracle" if m.q_oracle is not None else ("analytic" if m.q_analytic is not None else "")
    if m.mismatches():
        raise AssertionError(f"{plan.scheme_id}: " + "; ".join(m.mismatches()))
    if kappa and m.s is not None:
        try:
            m.kappa_worst = worst_case_condition_number(plan, m.s, budget)
        except BudgetExceeded:
            pass
    return m, s_src, q_src


def table_rows(table_id: str, budget: int = 10**7, kappa: bool = True, seed: int = 0) -> list[list]:
    if table_id not in TABLES:
        raise ValueError(f"unknown table {table_id!r}; choose from {sorted(TABLES)}")
    entries = TABLES[table_id]
    plans = [build_plan({**cfg, "seed": seed}) for _, _, cfg in entries]
    base = None
    if table_id in _COST_BASE:
        base = plans[[meth for _, meth, _ in entries].index(_COST_BASE[table_id])]
    rows = []
    for (system, method, _), plan in zip(entries, plans):
        m, s_src, q_src = table_metrics(plan, budget, kappa and table_id != "III")
        qd = "" if m.q is None else f"{m.q}/{plan.delta}"
        row = [table_id, system, method, plan.scheme_id, plan.n, plan.delta,
               "" if m.s is None else m.s, s_src, "" if m.q is None else m.q, qd, q_src,
               "" if m.kappa_worst is None else f"{m.kappa_worst:.6g}"]
        for d in TABLE_DENSITIES:
            if base is None:
                row.append("")
                continue
            work = Workload(rows=1, cols_a=1, density_a=d, cols_b=1, density_b=d)
            row.append(f"{worker_cost(plan, work) / worker_cost(base, work):.4g}")
        rows.append(row)
    return rows
