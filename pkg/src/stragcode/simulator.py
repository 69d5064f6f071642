"""Event-driven emulation of workers running their task lists in order.

Task durations come from flop counts (measured on concrete encoded blocks,
or expected from block densities) scaled by a per-worker slowdown.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .blockmat import BlockPartition, SparseMatrix, encode_block, spgemm_flops
from .decoder import Checker
from .schemes import EncodingPlan, Task


@dataclass(frozen=True)
class SpeedModel:
    """Per-worker slowdown factors (>= 1, inf = dead worker).

    slowdown is one of
      {"kind": "deterministic", "values": [...]}
      {"kind": "uniform", "lo": 1.0, "hi": 1.5}
      {"kind": "shifted_exponential", "shift": 1.0, "rate": 2.0}
    """

    base_time: float = 1.0
    slowdown: dict = field(default_factory=lambda: {"kind": "uniform", "lo": 1.0, "hi": 1.5})
    overhead: float = 0.0
    jitter: float = 0.0  # per-task multiplicative noise, off by default

    def __post_init__(self):
        if self.base_time <= 0:
            raise ValueError("base_time must be positive")
        if self.overhead < 0:
            raise ValueError("overhead must be non-negative")
        kind = self.slowdown.get("kind")
        if kind == "uniform" and not 1.0 <= self.slowdown["lo"] <= self.slowdown["hi"]:
            raise ValueError("uniform slowdown needs 1 <= lo <= hi")
        if kind == "shifted_exponential" and (self.slowdown["shift"] < 1 or self.slowdown["rate"] <= 0):
            raise ValueError("shifted exponential needs shift >= 1 and rate > 0")
        if kind == "deterministic" and any(v < 1 for v in self.slowdown["values"]):
            raise ValueError("slowdowns must be >= 1")
        if kind not in ("uniform", "shifted_exponential", "deterministic"):
            raise ValueError(f"unknown slowdown kind {kind!r}")

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        kind = self.slowdown["kind"]
        if kind == "deterministic":
            vals = np.asarray(self.slowdown["values"], dtype=float)
            if vals.shape != (n,):
                raise ValueError(f"{vals.size} slowdowns for {n} workers")
            return vals.copy()
        if kind == "uniform":
            return rng.uniform(self.slowdown["lo"], self.slowdown["hi"], size=n)
        return self.slowdown["shift"] + rng.exponential(1.0 / self.slowdown["rate"], size=n)

    @classmethod
    def from_json(cls, d: dict) -> SpeedModel:
        return cls(d.get("base_time", 1.0), d.get("slowdown", {"kind": "uniform", "lo": 1.0, "hi": 1.5}),
                   d.get("overhead", 0.0), d.get("jitter", 0.0))


@dataclass(frozen=True)
class Workload:
    """Expected-cost description of A (rows x cols_a) and B (rows x cols_b)."""

    rows: int
    cols_a: int
    density_a: float
    cols_b: int = 1
    density_b: float = 1.0


@dataclass
class RunReport:
    completion_time: float
    state: tuple[int, ...]
    total: int
    decodable: bool
    slowdowns: tuple[float, ...] = ()
    timeline: list[tuple[float, int, int]] | None = None


def encoded_density(sigma: float, support: int) -> float:
    return 1.0 - (1.0 - sigma) ** support


def expected_task_cost(plan: EncodingPlan, task: Task, work: Workload) -> float:
    wa = work.cols_a / plan.delta_a
    da = encoded_density(work.density_a, len(task.a.support))
    if task.b is None:
        return 2.0 * work.rows * wa * da
    wb = work.cols_b / plan.delta_b
    db = encoded_density(work.density_b, len(task.b.support))
    return work.rows * wa * wb * da * db


class MeasuredCosts:
    """Flop counts of tasks on concrete matrices, caching encoded blocks."""

    def __init__(self, plan: EncodingPlan, a: SparseMatrix, b: SparseMatrix | None = None):
        self.plan = plan
        self.a = a
        self.b = b
        self.pa = BlockPartition(a.cols, plan.delta_a)
        self.pb = BlockPartition(b.cols, plan.delta_b) if b is not None and plan.kind == "matmat" else None
        self._cache: dict = {}

    def encoded(self, side: str, coeffs) -> SparseMatrix:
        key = (side, coeffs)
        if key not in self._cache:
            if side == "a":
                self._cache[key] = encode_block(self.a, self.pa, coeffs)
            else:
                self._cache[key] = encode_block(self.b, self.pb, coeffs)
        return self._cache[key]

    def __call__(self, task: Task) -> float:
        ea = self.encoded("a", task.a)
        if task.b is None:
            return 2.0 * ea.nnz
        if self.pb is None:
            raise ValueError("matmat plan needs a B matrix in measured mode")
        return float(spgemm_flops(ea, self.encoded("b", task.b)))


def task_cost(task: Task, plan: EncodingPlan, a: SparseMatrix | None = None,
              b: SparseMatrix | None = None, workload: Workload | None = None) -> float:
    if a is not None:
        return MeasuredCosts(plan, a, b)(task)
    if workload is None:
        raise ValueError("need matrices (measured mode) or a workload (expectation mode)")
    return expected_task_cost(plan, task, workload)


def task_durations(plan: EncodingPlan, speed: SpeedModel, slowdowns: np.ndarray, cost,
                   rng: np.random.Generator) -> np.ndarray:
    """(n, ell) per-task durations; inf for dead workers."""
    out = np.empty((plan.n, plan.ell))
    for i in range(plan.n):
        for task in plan.tasks(i):
            flops = cost(task)
            jit = 1.0 + speed.jitter * rng.random() if speed.jitter else 1.0
            if math.isinf(slowdowns[i]):
                out[i, task.position] = math.inf
            else:
                out[i, task.position] = slowdowns[i] * jit * speed.base_time * flops + speed.overhead
    return out


def simulate(plan: EncodingPlan, speed: SpeedModel, seed: int = 0, a: SparseMatrix | None = None,
             b: SparseMatrix | None = None, workload: Workload | None = None,
             checker: Checker | None = None, keep_timeline: bool = False) -> RunReport:
    rng = np.random.default_rng(seed)
    slow = speed.draw(plan.n, rng)
    if a is not None:
        cost = MeasuredCosts(plan, a, b)
    elif workload is not None:
        def cost(task):
            return expected_task_cost(plan, task, workload)
    else:
        raise ValueError("need matrices (measured mode) or a workload (expectation mode)")
    dur = task_durations(plan, speed, slow, cost, rng)
    finish = np.cumsum(dur, axis=1)
    events = sorted((finish[i, t], i, t) for i in range(plan.n) for t in range(plan.ell)
                    if math.isfinite(finish[i, t]))
    chk = checker or Checker(plan)
    w = np.zeros(plan.n, dtype=np.int64)
    timeline = [] if keep_timeline else None
    total = 0
    last = 0.0
    for time_, i, t in events:
        w[i] = t + 1
        total += 1
        last = time_
        if keep_timeline:
            timeline.append((float(time_), i, t))
        # the flag is monotone, so only test once enough rows exist
        if total >= plan.delta and chk(w):
            return RunReport(float(time_), tuple(int(x) for x in w), total, True,
                             tuple(slow.tolist()), timeline)
    return RunReport(float(last), tuple(int(x) for x in w), total, False, tuple(slow.tolist()), timeline)


COMPARE_HEADER = ["label", "scheme_id", "n", "trials", "mean_time", "min_time", "max_time",
                  "mean_tasks", "failures", "kappa_worst"]


def compare_schemes(configs, trials: int, speed: SpeedModel, seed: int = 0,
                    workload: Workload | None = None) -> str:
    """configs: iterable of dicts with "label", "plan" and optionally
    "kappa_worst", "a", "b". Returns CSV text."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COMPARE_HEADER)
    for k, cfg in enumerate(configs):
        plan = cfg["plan"]
        chk = Checker(plan)
        times, tasks, fails = [], [], 0
        for trial in range(trials):
            rep = simulate(plan, speed, seed=seed * 100003 + trial, a=cfg.get("a"), b=cfg.get("b"),
                           workload=workload, checker=chk)
            if not rep.decodable:
                fails += 1
                continue
            times.append(rep.completion_time)
            tasks.append(rep.total)
        kappa = cfg.get("kappa_worst")
        row = [cfg.get("label", plan.scheme_id), plan.scheme_id, plan.n, trials]
        if times:
            row += [f"{np.mean(times):.6g}", f"{np.min(times):.6g}", f"{np.max(times):.6g}",
                    f"{np.mean(tasks):.4g}"]
        else:
            row += ["", "", "", ""]
        row += [fails, "" if kappa is None else f"{kappa:.6g}"]
        wr.writerow(row)
    return buf.getvalue()
