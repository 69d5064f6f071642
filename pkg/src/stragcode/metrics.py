"""Straggler resilience s and the partial-work threshold Q.

Closed forms live in ``analytic_metrics``; the oracles below compute the same
quantities by enumeration and never look at those formulas.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import ceil, comb, lcm

import numpy as np

from .decoder import SVD_RTOL, Checker
from .schemes import EncodingPlan, RegimeError, as_fraction

DEFAULT_BUDGET = 10**7


class BudgetExceeded(RuntimeError):
    pass


class MetricsMismatch(AssertionError):
    pass


@dataclass
class SchemeMetrics:
    scheme_id: str
    n: int
    delta: int
    params: dict = field(default_factory=dict)
    s_analytic: int | None = None
    s_lower: int | None = None  # proven lower bound when no exact formula exists
    s_oracle: int | None = None
    q_analytic: int | None = None
    q_lower: int | None = None
    q_oracle: int | None = None
    kappa_worst: float | None = None
    oracle_method: str | None = None
    seconds: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def s(self) -> int | None:
        return self.s_oracle if self.s_oracle is not None else self.s_analytic

    @property
    def q(self) -> int | None:
        return self.q_oracle if self.q_oracle is not None else self.q_analytic

    @property
    def q_over_delta(self) -> Fraction | None:
        return None if self.q is None else Fraction(self.q, self.delta)

    def mismatches(self) -> list[str]:
        out = []
        if None not in (self.s_analytic, self.s_oracle) and self.s_analytic != self.s_oracle:
            out.append(f"s: analytic {self.s_analytic} vs oracle {self.s_oracle}")
        if None not in (self.q_analytic, self.q_oracle) and self.q_analytic != self.q_oracle:
            out.append(f"Q: analytic {self.q_analytic} vs oracle {self.q_oracle}")
        if None not in (self.s_lower, self.s_oracle) and self.s_oracle < self.s_lower:
            out.append(f"s: oracle {self.s_oracle} below proven bound {self.s_lower}")
        if None not in (self.q_lower, self.q_oracle) and self.q_oracle < self.q_lower:
            out.append(f"Q: oracle {self.q_oracle} below lower bound {self.q_lower}")
        return out

    def check(self) -> None:
        bad = self.mismatches()
        if bad:
            raise MetricsMismatch(f"{self.scheme_id} {self.params}: " + "; ".join(bad))


# ---------------------------------------------------------------- closed forms

def lower_bound_q_uncoded(delta: int, r: int, ell: int) -> int:
    """Q >= delta*r - (r/2)(ell+1) + 1 for any uncoded layout with replication r."""
    if min(delta, r, ell) < 1:
        raise RegimeError("delta, r and ell must be positive")
    return ceil(Fraction(delta * r) - Fraction(r * (ell + 1), 2) + 1)


def lower_bound_q_ratio(n: int, gamma, delta: int) -> Fraction:
    """Same bound divided by delta, written with gamma = ell/delta."""
    gamma = as_fraction(gamma)
    return n * gamma * (1 - gamma / 2) + (1 - n * gamma / 2) / Fraction(delta)


def _q_single_class(c: int, groupsize: int, ell: int, beta: int) -> int:
    # groupsize is the number of meta-symbols per class (delta / beta)
    c1, c2 = divmod(beta - 1, c)
    return (c * (groupsize * ell - ell * (ell + 1) // 2)
            + c * sum(ell - i for i in range(c1)) + c2 * (ell - c1) + 1)


def kappa_min(a2: int, a_u: int, a_c: int, mb1: int) -> int:
    kappa = 1
    while ceil(kappa / mb1) + kappa * a_c < a2 - a_u + 1:
        kappa += 1
    return kappa


def analytic_metrics(scheme_id: str, **p) -> SchemeMetrics:
    """Closed-form s and Q for a scheme; raises RegimeError outside the
    conditions the formulas are proven under."""
    n = int(p["n"])
    fn = _ANALYTIC.get(scheme_id)
    if fn is None:
        raise RegimeError(f"no closed form for scheme {scheme_id!r}")
    return fn(n, p)


def analytic_for_plan(plan: EncodingPlan) -> SchemeMetrics:
    return analytic_metrics(plan.scheme_id, n=plan.n, **plan.params)


def _beta_matvec(n, p):
    gamma = as_fraction(p["gamma"])
    beta = int(p["beta"])
    a1, a2 = gamma.numerator, gamma.denominator
    c = n // a2
    ell, delta = beta * a1, beta * a2
    design = p.get("design", "single")
    m = SchemeMetrics("beta_matvec", n, delta, dict(p))
    if c * ell < beta:
        raise RegimeError(f"requires c*ell >= beta (c={c}, ell={ell}, beta={beta})")
    if design == "single":
        m.s_analytic = c * ell - beta
        m.q_analytic = _q_single_class(c, a2, ell, beta)
        if beta == 1:
            m.q_lower = lower_bound_q_uncoded(delta, n * ell // delta, ell)
    elif design == "shifted":
        if not (c == beta == 2 and delta >= 8 and ell <= delta // 2 - 2):
            raise RegimeError(f"shifted classes need c = beta = 2, delta >= 8, ell <= delta/2 - 2 "
                              f"(c={c}, beta={beta}, delta={delta}, ell={ell})")
        m.s_analytic = 2 * ell - 1
        m.q_analytic = n * ell - ell * (ell + 1) + 1
    else:
        if c < beta:
            raise RegimeError(f"requires c >= beta for the multi-class bound (c={c}, beta={beta})")
        lam = min(beta - 1, c - beta)
        m.s_lower = c * ell - beta + lam
    return m


def _beta_matmat(n, p):
    ga, gb = as_fraction(p["gamma_a"]), as_fraction(p["gamma_b"])
    ba, bb = int(p["beta_a"]), int(p["beta_b"])
    a2, b2 = ga.denominator, gb.denominator
    c = n // (a2 * b2)
    ell_a, ell_b = ba * ga.numerator, bb * gb.numerator
    ell, beta = ell_a * ell_b, ba * bb
    delta = ba * a2 * bb * b2
    design = p.get("design", "single")
    m = SchemeMetrics("beta_matmat", n, delta, dict(p))
    if c * ell < beta:
        raise RegimeError(f"requires c*ell >= beta (c={c}, ell={ell}, beta={beta})")
    if design == "single":
        m.s_analytic = c * ell - beta
        m.q_analytic = _q_single_class(c, a2 * b2, ell, beta)
    elif design == "shifted":
        delta_a = ba * a2
        if not (c == 2 and ba == 2 and bb == 1 and delta_a >= 8 and ell_a <= delta_a // 2 - 2):
            raise RegimeError(f"shifted classes need c = beta_A = 2, beta_B = 1, delta_A >= 8, "
                              f"ell_A <= delta_A/2 - 2 (c={c}, delta_A={delta_a}, ell_A={ell_a})")
        m.s_analytic = 2 * ell - 1
        m.q_analytic = n * ell - ell * (ell + 1) + 1
    else:
        raise RegimeError("no closed form for multi-class matrix-matrix plans")
    return m


def _coded_bottom_matvec(n, p):
    gu, gc = as_fraction(p["gamma_u"]), as_fraction(p["gamma_c"])
    ell_u, ell_c = int(gu * n), int(gc * n)
    if ell_u < 1:
        raise RegimeError("requires at least one uncoded block per worker (ell_u >= 1)")
    m = SchemeMetrics("coded_bottom_matvec", n, n, dict(p))
    m.s_analytic = (n * ell_c + ell_u - 1) // (ell_c + 1)
    m.q_analytic = max(n, n * ell_u - ell_u * (ell_u + 1) // 2 + 1)
    return m


def _coded_bottom_matmat(n, p):
    a2, a_u, a_c = int(p["a2"]), int(p["a_u"]), int(p["a_c"])
    b1, b2, mm = int(p["b1"]), int(p["b2"]), int(p["m"])
    mb1 = mm * b1
    k = kappa_min(a2, a_u, a_c, mb1)
    if k > a2 * mb1:
        raise RegimeError("some B block cannot be decoded even with every worker finished")
    m = SchemeMetrics("coded_bottom_matmat", n, a2 * mm * b2, dict(p))
    m.s_analytic = mm * a2 * b1 - k
    m.params["kappa_min"] = k
    m.params["tau"] = n - m.s_analytic
    # the closed-form Q only survives the exhaustive oracle with a single
    # uncoded A block per worker; for a_u >= 2 it undercounts
    if a_c >= 1 and a_u == 1:
        a1 = a_u + a_c
        qbar = (n - mm * a2 * b1) * mm * a1 * b1 + a2 * mb1 * (mb1 - 1) // 2
        m.q_analytic = qbar + ((a2 - a_u) + a_u * (a_u - 1) // 2) * mb1 * mb1 + 1
    return m


def _scs_matvec(n, p):
    k = int(p["k_a"])
    if not 1 <= k <= n:
        raise RegimeError(f"requires 1 <= k_A <= n (k_A={k}, n={n})")
    delta = lcm(n, k)
    m = SchemeMetrics("scs_matvec", n, delta, dict(p))
    m.s_analytic = n - k
    m.q_analytic = delta
    return m


def _scs_matmat(n, p):
    ka, kb = int(p["k_a"]), int(p["k_b"])
    if ka * kb > n:
        raise RegimeError(f"requires k_A*k_B <= n (k_A={ka}, k_B={kb}, n={n})")
    delta_a = lcm(n, ka)
    delta = delta_a * kb
    ell_c = delta_a // ka - delta // n
    m = SchemeMetrics("scs_matmat", n, delta, dict(p))
    m.s_analytic = n - ka * kb
    m.q_analytic = delta + (kb - 1) * ell_c
    return m


def _mds_like(sid):
    def fn(n, p):
        ka, kb = int(p["k_a"]), int(p.get("k_b", 1))
        if ka * kb > n:
            raise RegimeError(f"requires k_A*k_B <= n (k_A={ka}, k_B={kb}, n={n})")
        m = SchemeMetrics(sid, n, ka * kb, dict(p))
        m.s_analytic = n - ka * kb
        m.q_analytic = ka * kb
        return m
    return fn


_ANALYTIC = {
    "beta_matvec": _beta_matvec,
    "beta_matmat": _beta_matmat,
    "coded_bottom_matvec": _coded_bottom_matvec,
    "coded_bottom_matmat": _coded_bottom_matmat,
    "scs_matvec": _scs_matvec,
    "scs_matmat": _scs_matmat,
    "polynomial": _mds_like("polynomial"),
    "dense_random": _mds_like("dense_random"),
}


def scs_identity_holds(n: int, k_a: int, k_b: int) -> bool:
    """Q/delta == 1 + (k_B - 1) s / (n k_A k_B) for the SCS matmat closed form."""
    m = _scs_matmat(n, {"k_a": k_a, "k_b": k_b})
    return m.q_over_delta == 1 + Fraction((k_b - 1) * m.s_analytic, n * k_a * k_b)


# --------------------------------------------------------------------- oracles

def _full_state(plan: EncodingPlan, dead) -> np.ndarray:
    w = np.full(plan.n, plan.ell, dtype=np.int64)
    w[list(dead)] = 0
    return w


def _probe_sets(plan: EncodingPlan, s: int):
    """Straggler sets that pile onto a single unknown: for each unknown, the
    s workers holding the most tasks that touch it."""
    touch = np.zeros((plan.n, plan.delta), dtype=np.int64)
    for i in range(plan.n):
        for t in plan.tasks(i):
            touch[i, list(plan.task_support(t))] += 1
    for u in range(plan.delta):
        order = np.lexsort((np.arange(plan.n), -touch[:, u]))
        yield tuple(sorted(order[:s].tolist()))


def oracle_straggler_resilience(plan: EncodingPlan, checker: Checker | None = None,
                                budget: int = DEFAULT_BUDGET) -> int:
    """Largest s such that every set of s dead workers leaves a decodable state.

    Levels are scanned from the top down. A level above the answer normally
    falls to one of a few targeted probes; the answer is the first level whose
    full enumeration passes. By monotonicity this equals the upward scan.
    """
    chk = checker or Checker(plan)
    n = plan.n
    if not chk(_full_state(plan, ())):
        raise ValueError("full completion is not decodable")
    top = min(n - 1, n - ceil(plan.delta / plan.ell))
    spent = 0
    for s in range(top, 0, -1):
        if any(not chk(_full_state(plan, dead)) for dead in _probe_sets(plan, s)):
            continue
        if spent + comb(n, s) > budget:
            raise BudgetExceeded(f"checking s={s} needs C({n}, {s}) = {comb(n, s)} subsets "
                                 f"(budget {budget}, {spent} used)")
        ok = True
        for dead in combinations(range(n), s):
            spent += 1
            if not chk(_full_state(plan, dead)):
                ok = False
                break
        if ok:
            return s
    return 0


def _states_with_deficit(n: int, ell: int, d: int):
    """All w in [0, ell]^n with sum(ell - w) == d."""
    w = np.full(n, ell, dtype=np.int64)

    def rec(i, left):
        if i == n - 1:
            if left <= ell:
                w[i] = ell - left
                yield w
            return
        cap = min(ell, left)
        if left - cap > (n - 1 - i) * ell:
            return
        for take in range(cap, -1, -1):
            if left - take > (n - 1 - i) * ell:
                break
            w[i] = ell - take
            yield from rec(i + 1, left - take)
        w[i] = ell

    yield from rec(0, d)


def oracle_q_exhaustive(plan: EncodingPlan, checker: Checker | None = None,
                        budget: int = DEFAULT_BUDGET) -> int:
    """1 + the largest weight of an undecodable state, searching weights from
    the top so the scan stops at the first undecodable level."""
    if (plan.ell + 1) ** plan.n > budget:
        raise BudgetExceeded(f"(ell+1)^n = {(plan.ell + 1) ** plan.n} states exceeds budget {budget}")
    chk = checker or Checker(plan)
    total = plan.n * plan.ell
    if not chk(np.full(plan.n, plan.ell, dtype=np.int64)):
        raise ValueError("full completion is not decodable")
    for d in range(1, total + 1):
        if total - d < plan.delta:
            return total - d + 1
        for w in _states_with_deficit(plan.n, plan.ell, d):
            if not chk(w):
                return total - d + 1
    return 1


def meta_symbols(plan: EncodingPlan) -> dict[tuple[int, ...], list[tuple[int, int]]]:
    """Map each distinct task support to its (worker, position) occurrences,
    after checking the supports form one partition of the unknowns."""
    occ: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    for i in range(plan.n):
        for t in plan.tasks(i):
            occ.setdefault(tuple(sorted(plan.task_support(t))), []).append((i, t.position))
    seen = [p for sup in occ for p in sup]
    if sorted(seen) != list(range(plan.delta)):
        raise ValueError("task supports do not form a single parallel class")
    sizes = {len(s) for s in occ}
    if len(sizes) != 1:
        raise ValueError("task supports have different sizes")
    for sup, where in occ.items():
        if len({i for i, _ in where}) != len(where):
            raise ValueError("a worker holds the same meta-symbol twice")
    return occ


def oracle_q_structure(plan: EncodingPlan) -> int:
    """Q for single-class plans: a state is undecodable exactly when some
    meta-symbol has fewer than beta processed copies."""
    occ = meta_symbols(plan)
    beta = len(next(iter(occ)))
    ell = plan.ell
    best = -1
    for where in occ.values():
        base = plan.n * ell - sum(ell - pos for _, pos in where)
        gains = sorted((ell - pos for _, pos in where), reverse=True)
        best = max(best, base + sum(gains[: beta - 1]))
    return best + 1


def oracle_s_structure(plan: EncodingPlan) -> int:
    occ = meta_symbols(plan)
    beta = len(next(iter(occ)))
    return min(len(where) for where in occ.values()) - beta


def oracle_q(plan: EncodingPlan, method: str = "exhaustive", checker: Checker | None = None,
             budget: int = DEFAULT_BUDGET) -> int:
    if method == "exhaustive":
        return oracle_q_exhaustive(plan, checker, budget)
    if method == "structure-aware":
        return oracle_q_structure(plan)
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------- condition numbers

def _real_rows(plan: EncodingPlan) -> np.ndarray:
    rows = np.zeros((plan.n, plan.ell, plan.delta))
    for i in range(plan.n):
        for t in plan.tasks(i):
            rows[i, t.position] = plan.task_row(t)
    return rows


def worst_case_condition_number(plan: EncodingPlan, s: int, budget: int = DEFAULT_BUDGET,
                                return_set: bool = False):
    """Max of sigma_max/sigma_min over every choice of s fully dead workers
    (survivors at full completion)."""
    if comb(plan.n, s) > budget:
        raise BudgetExceeded(f"C({plan.n}, {s}) = {comb(plan.n, s)} subsets exceeds budget {budget}")
    rows = _real_rows(plan)
    worst, worst_set = -1.0, ()
    for dead in combinations(range(plan.n), s):
        alive = [i for i in range(plan.n) if i not in set(dead)]
        m = rows[alive].reshape(-1, plan.delta)
        if m.shape[0] < plan.delta:
            k = float("inf")
        else:
            sv = np.linalg.svd(m, compute_uv=False)
            k = float("inf") if sv[-1] <= max(m.shape) * sv[0] * SVD_RTOL else float(sv[0] / sv[-1])
        if k > worst:
            worst, worst_set = k, dead
        if k == float("inf"):
            break
    return (worst, worst_set) if return_set else worst


# ------------------------------------------------------------------ reporting

def compute_metrics(plan: EncodingPlan, analytic: bool = True, oracle: bool = True,
                    kappa: bool = False, budget: int = DEFAULT_BUDGET,
                    q_method: str = "auto") -> SchemeMetrics:
    t0 = time.perf_counter()
    m = SchemeMetrics(plan.scheme_id, plan.n, plan.delta, dict(plan.params))
    if analytic:
        try:
            m = analytic_for_plan(plan)
        except RegimeError as exc:
            m.notes.append(f"no closed form: {exc}")
    if oracle:
        chk = Checker(plan)
        single = _is_single_class(plan)
        if q_method == "auto":
            if (plan.ell + 1) ** plan.n <= budget:
                q_method = "exhaustive"
            elif single:
                q_method = "structure-aware"
            else:
                q_method = "subset-only"
        if q_method != "subset-only":
            m.q_oracle = oracle_q(plan, q_method, chk, budget)
        m.oracle_method = q_method
        try:
            m.s_oracle = oracle_straggler_resilience(plan, chk, budget)
        except BudgetExceeded:
            if not single:
                raise
            m.s_oracle = oracle_s_structure(plan)
            m.notes.append("s from meta-symbol counts")
    if kappa:
        s = m.s
        if s is not None:
            m.kappa_worst = worst_case_condition_number(plan, s, budget)
    m.seconds = time.perf_counter() - t0
    return m


def _is_single_class(plan: EncodingPlan) -> bool:
    if plan.structure != "generic":
        return False
    try:
        occ = meta_symbols(plan)
    except ValueError:
        return False
    # structure-aware Q needs every row of a meta-symbol to carry its own
    # coefficients, which holds for the beta-level builders
    return plan.scheme_id in ("beta_matvec", "beta_matmat") and len(occ) > 0


def fmt(x):
    return "" if x is None else x


CSV_HEADER = ["scheme_id", "n", "params", "delta", "s_analytic", "s_oracle", "q_analytic",
              "q_oracle", "q_over_delta", "kappa_worst", "oracle_method", "seconds", "status"]


def metrics_rows(results, statuses=None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for k, m in enumerate(results):
        status = statuses[k] if statuses else "ok"
        params = ";".join(f"{key}={val}" for key, val in sorted(m.params.items()))
        kappa = "" if m.kappa_worst is None else f"{m.kappa_worst:.6g}"
        wr.writerow([m.scheme_id, m.n, params, m.delta, fmt(m.s_analytic),
                     fmt(m.s_oracle), fmt(m.q_analytic), fmt(m.q_oracle), fmt(m.q_over_delta),
                     kappa, fmt(m.oracle_method), f"{m.seconds:.3f}", status])
    return buf.getvalue()
