"""Builders for encoding plans.

A plan lists, for every worker, the coded A block-columns and (for matmat)
the coded B block-columns it stores. Its tasks are the products of those,
taken in row-major order: (A0,B0), (A0,B1), ..., (A1,B0), ...  For matvec
plans the tasks are just the coded A blocks in order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from pathlib import Path

import numpy as np

from .blockmat import CoefficientVector
from .designs import DesignSet, check_cross_intersection, shifted_pair_classes, trivial_classes

DEAD_ZONE = 1e-3


class RegimeError(ValueError):
    """Parameters fall outside what a construction or theorem supports."""


@dataclass(frozen=True)
class Task:
    a: CoefficientVector
    b: CoefficientVector | None
    position: int


@dataclass(frozen=True)
class WorkerStore:
    a: tuple[CoefficientVector, ...]
    b: tuple[CoefficientVector, ...] = ()


@dataclass(frozen=True, eq=False)
class EncodingPlan:
    kind: str
    n: int
    delta_a: int
    delta_b: int
    ell: int
    workers: tuple[WorkerStore, ...]
    scheme_id: str
    seed: int
    params: dict = field(default_factory=dict)
    # "generic": every coded block carries its own free coefficients.
    # "polynomial": coefficients are powers of per-worker evaluation points.
    structure: str = "generic"
    eval_points: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("matvec", "matmat"):
            raise ValueError(f"unknown plan kind {self.kind!r}")
        if len(self.workers) != self.n:
            raise ValueError(f"{len(self.workers)} workers listed, n={self.n}")
        if self.kind == "matvec" and self.delta_b != 1:
            raise ValueError("matvec plans have delta_b == 1")
        for i, w in enumerate(self.workers):
            if any(c.length != self.delta_a for c in w.a):
                raise ValueError(f"worker {i}: A coefficient length != delta_a")
            if self.kind == "matvec":
                if w.b:
                    raise ValueError(f"worker {i}: matvec worker stores B blocks")
                count = len(w.a)
            else:
                if any(c.length != self.delta_b for c in w.b):
                    raise ValueError(f"worker {i}: B coefficient length != delta_b")
                count = len(w.a) * len(w.b)
            if count != self.ell:
                raise ValueError(f"worker {i} has {count} tasks, expected {self.ell}")
        touched = np.zeros(self.delta, dtype=bool)
        for i in range(self.n):
            for t in self.tasks(i):
                touched[list(self.task_support(t))] = True
        if not touched.all():
            raise ValueError(f"unknowns {np.flatnonzero(~touched).tolist()} are never touched")

    @property
    def delta(self) -> int:
        return self.delta_a * self.delta_b

    @property
    def ell_a(self) -> int:
        return len(self.workers[0].a) if self.n else 0

    @property
    def ell_b(self) -> int:
        return len(self.workers[0].b) if self.kind == "matmat" and self.n else 1

    def tasks(self, i: int) -> list[Task]:
        w = self.workers[i]
        if self.kind == "matvec":
            return [Task(a, None, t) for t, a in enumerate(w.a)]
        return [Task(a, b, ia * len(w.b) + ib) for ia, a in enumerate(w.a) for ib, b in enumerate(w.b)]

    def task_support(self, task: Task) -> tuple[int, ...]:
        """Unknown indices touched by a task; unknown (i, j) has index i*delta_b + j."""
        if task.b is None:
            return task.a.support
        return tuple(p * self.delta_b + q for p in task.a.support for q in task.b.support)

    def task_row(self, task: Task) -> np.ndarray:
        if task.b is None:
            return task.a.dense()
        return np.kron(task.a.dense(), task.b.dense())

    def to_json(self) -> dict:
        def enc(c):
            return {"support": list(c.support), "values": list(c.values)}
        out = {
            "scheme_id": self.scheme_id, "kind": self.kind, "n": self.n,
            "delta_a": self.delta_a, "delta_b": self.delta_b, "ell": self.ell,
            "seed": self.seed, "params": self.params, "structure": self.structure,
            "eval_points": list(self.eval_points) if self.eval_points is not None else None,
            "workers": [{"a": [enc(c) for c in w.a], "b": [enc(c) for c in w.b]} for w in self.workers],
        }
        return out

    @classmethod
    def from_json(cls, d: dict) -> EncodingPlan:
        def dec(length, c):
            return CoefficientVector(length, tuple(c["support"]), tuple(c["values"]))
        workers = tuple(WorkerStore(tuple(dec(d["delta_a"], c) for c in w["a"]),
                                    tuple(dec(d["delta_b"], c) for c in w["b"]))
                        for w in d["workers"])
        pts = d.get("eval_points")
        return cls(d["kind"], d["n"], d["delta_a"], d["delta_b"], d["ell"], workers,
                   d["scheme_id"], d["seed"], d.get("params", {}), d.get("structure", "generic"),
                   tuple(pts) if pts is not None else None)


def save_plan(plan: EncodingPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_json(), indent=1) + "\n")


def load_plan(path) -> EncodingPlan:
    return EncodingPlan.from_json(json.loads(Path(path).read_text()))


def as_fraction(x) -> Fraction:
    f = Fraction(x)
    if f < 0:
        raise RegimeError(f"negative storage fraction {x}")
    return f


def random_coeffs(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform on [-1, 1] with the dead zone |x| < 1e-3 cut out."""
    mag = rng.uniform(DEAD_ZONE, 1.0, size=size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return mag * sign


def _coded(rng, length: int, support) -> CoefficientVector:
    support = tuple(support)
    if len(support) == 1:
        # a lone block is stored uncoded
        return CoefficientVector.unit(length, support[0])
    return CoefficientVector(length, support, tuple(random_coeffs(rng, len(support)).tolist()))


def _unit(length: int, i: int) -> CoefficientVector:
    return CoefficientVector.unit(length, i % length)


def design_kind(designs: DesignSet) -> str:
    first = set(designs.classes[0].blocks)
    if all(set(c.blocks) == first for c in designs.classes):
        return "single"
    if len(designs.classes) == 2 and designs.num_points >= 8 and designs.num_points % 2 == 0:
        sp = shifted_pair_classes(designs.num_points)
        if designs.classes == sp.classes:
            return "shifted"
    return "multi"


def _check_design(designs: DesignSet, c: int, delta: int, beta: int, side: str) -> None:
    if len(designs.classes) != c:
        raise RegimeError(f"{side}: need one parallel class per group (c={c}), got {len(designs.classes)}")
    if designs.num_points != delta:
        raise RegimeError(f"{side}: classes live on {designs.num_points} points, need delta={delta}")
    if designs.block_size != beta:
        raise RegimeError(f"{side}: block size {designs.block_size} != beta={beta}")


def build_beta_matvec(n: int, gamma, beta: int, designs: DesignSet | None = None,
                      seed: int = 0) -> EncodingPlan:
    gamma = as_fraction(gamma)
    a1, a2 = gamma.numerator, gamma.denominator
    if gamma == 0 or gamma * beta > 1:
        raise RegimeError(f"requires 0 < gamma <= 1/beta (gamma={gamma}, beta={beta})")
    if n % a2:
        raise RegimeError(f"requires a2={a2} to divide n={n}")
    c = n // a2
    delta = beta * a2
    ell = beta * a1
    if designs is None:
        designs = trivial_classes(delta, beta, c)
    _check_design(designs, c, delta, beta, "A")
    kind = design_kind(designs)
    if kind == "multi":
        check_cross_intersection(designs)
    rng = np.random.default_rng(seed)
    workers = []
    for i in range(n):
        blocks = designs.classes[i // a2].blocks
        j = i % a2
        workers.append(WorkerStore(tuple(_coded(rng, delta, blocks[(j + t) % a2]) for t in range(ell))))
    params = {"gamma": str(gamma), "beta": beta, "c": c, "design": kind}
    return EncodingPlan("matvec", n, delta, 1, ell, tuple(workers), "beta_matvec", seed, params)


def build_beta_matmat(n: int, gamma_a, gamma_b, beta_a: int, beta_b: int,
                      designs_a: DesignSet | None = None, designs_b: DesignSet | None = None,
                      seed: int = 0) -> EncodingPlan:
    gamma_a, gamma_b = as_fraction(gamma_a), as_fraction(gamma_b)
    a1, a2 = gamma_a.numerator, gamma_a.denominator
    b1, b2 = gamma_b.numerator, gamma_b.denominator
    if gamma_a == 0 or gamma_a * beta_a > 1:
        raise RegimeError(f"requires 0 < gamma_a <= 1/beta_a (gamma_a={gamma_a}, beta_a={beta_a})")
    if gamma_b == 0 or gamma_b * beta_b > 1:
        raise RegimeError(f"requires 0 < gamma_b <= 1/beta_b (gamma_b={gamma_b}, beta_b={beta_b})")
    if n % (a2 * b2):
        raise RegimeError(f"requires a2*b2={a2 * b2} to divide n={n}")
    c = n // (a2 * b2)
    delta_a, delta_b = beta_a * a2, beta_b * b2
    ell_a, ell_b = beta_a * a1, beta_b * b1
    if designs_a is None:
        designs_a = trivial_classes(delta_a, beta_a, c)
    if designs_b is None:
        designs_b = trivial_classes(delta_b, beta_b, c)
    _check_design(designs_a, c, delta_a, beta_a, "A")
    _check_design(designs_b, c, delta_b, beta_b, "B")
    kind_a, kind_b = design_kind(designs_a), design_kind(designs_b)
    if kind_a == "single" and kind_b == "single":
        kind = "single"
    elif kind_a == "shifted" and beta_b == 1:
        kind = "shifted"
    else:
        kind = "multi"
    rng = np.random.default_rng(seed)
    workers = []
    group = a2 * b2
    for i in range(n):
        g, j = divmod(i, group)
        pa = designs_a.classes[g].blocks
        pb = designs_b.classes[g].blocks
        k = j // a2
        a = tuple(_coded(rng, delta_a, pa[(j + t) % a2]) for t in range(ell_a))
        b = tuple(_coded(rng, delta_b, pb[(k + t) % b2]) for t in range(ell_b))
        workers.append(WorkerStore(a, b))
    params = {"gamma_a": str(gamma_a), "gamma_b": str(gamma_b), "beta_a": beta_a,
              "beta_b": beta_b, "c": c, "design": kind}
    return EncodingPlan("matmat", n, delta_a, delta_b, ell_a * ell_b, tuple(workers),
                        "beta_matmat", seed, params)


def _cyclic(start: int, count: int, delta: int) -> list[int]:
    return [(start + t) % delta for t in range(count)]


def _complement(taken, delta: int) -> list[int]:
    taken = set(taken)
    return [m for m in range(delta) if m not in taken]


def build_coded_bottom_matvec(n: int, gamma_u, gamma_c, seed: int = 0) -> EncodingPlan:
    gamma_u, gamma_c = as_fraction(gamma_u), as_fraction(gamma_c)
    delta = n
    if (gamma_u * delta).denominator != 1 or (gamma_c * delta).denominator != 1:
        raise RegimeError(f"requires gamma_u*n and gamma_c*n to be integers (n={n})")
    ell_u, ell_c = int(gamma_u * delta), int(gamma_c * delta)
    if ell_u + ell_c == 0:
        raise RegimeError("worker stores nothing")
    if ell_u > delta or (ell_c and ell_u == delta):
        raise RegimeError(f"requires ell_u < n when coded rows exist (ell_u={ell_u})")
    rng = np.random.default_rng(seed)
    workers = []
    for i in range(n):
        top = _cyclic(i, ell_u, delta)
        rest = _complement(top, delta)
        a = [_unit(delta, m) for m in top] + [_coded(rng, delta, rest) for _ in range(ell_c)]
        workers.append(WorkerStore(tuple(a)))
    params = {"gamma_u": str(gamma_u), "gamma_c": str(gamma_c)}
    return EncodingPlan("matvec", n, delta, 1, ell_u + ell_c, tuple(workers),
                        "coded_bottom_matvec", seed, params)


def build_coded_bottom_matmat(n: int, gamma_au, gamma_ac, gamma_b, seed: int = 0) -> EncodingPlan:
    gamma_au, gamma_ac, gamma_b = as_fraction(gamma_au), as_fraction(gamma_ac), as_fraction(gamma_b)
    a2 = lcm(gamma_au.denominator, gamma_ac.denominator)
    a_u, a_c = int(gamma_au * a2), int(gamma_ac * a2)
    b1, b2 = gamma_b.numerator, gamma_b.denominator
    if a_u + a_c == 0 or gamma_b == 0:
        raise RegimeError("worker stores nothing")
    if a_u + a_c > a2 or (a_c and a_u == a2):
        raise RegimeError(f"requires a_u + a_c <= a2 and a_u < a2 when coded rows exist")
    if gamma_b > 1:
        raise RegimeError("requires gamma_b <= 1")
    if n % (a2 * b2):
        raise RegimeError(f"requires a2*b2={a2 * b2} to divide n={n}")
    m = n // (a2 * b2)
    delta_a, delta_b = a2, m * b2
    ell_b = m * b1
    rng = np.random.default_rng(seed)
    workers = []
    for i in range(n):
        top = _cyclic(i, a_u, delta_a)
        rest = _complement(top, delta_a)
        a = [_unit(delta_a, p) for p in top] + [_coded(rng, delta_a, rest) for _ in range(a_c)]
        b = [_unit(delta_b, q) for q in _cyclic(i // a2, ell_b, delta_b)]
        workers.append(WorkerStore(tuple(a), tuple(b)))
    params = {"gamma_au": str(gamma_au), "gamma_ac": str(gamma_ac), "gamma_b": str(gamma_b),
              "a2": a2, "a_u": a_u, "a_c": a_c, "b1": b1, "b2": b2, "m": m}
    return EncodingPlan("matmat", n, delta_a, delta_b, (a_u + a_c) * ell_b, tuple(workers),
                        "coded_bottom_matmat", seed, params)


def build_scs_matvec(n: int, k_a: int, seed: int = 0) -> EncodingPlan:
    if not 1 <= k_a <= n:
        raise RegimeError(f"requires 1 <= k_A <= n (k_A={k_a}, n={n})")
    delta = lcm(n, k_a)
    u = delta // n
    ell_c = delta // k_a - u
    rng = np.random.default_rng(seed)
    workers = []
    for i in range(n):
        top = list(range(i * u, i * u + u))
        rest = _complement(top, delta)
        a = [_unit(delta, m) for m in top] + [_coded(rng, delta, rest) for _ in range(ell_c)]
        workers.append(WorkerStore(tuple(a)))
    params = {"k_a": k_a, "ell_c": ell_c}
    return EncodingPlan("matvec", n, delta, 1, u + ell_c, tuple(workers), "scs_matvec", seed, params)


def build_scs_matmat(n: int, k_a: int, k_b: int, seed: int = 0) -> EncodingPlan:
    if k_a < 1 or k_b < 1 or k_a * k_b > n:
        raise RegimeError(f"requires k_A*k_B <= n (k_A={k_a}, k_B={k_b}, n={n})")
    delta_a, delta_b = lcm(n, k_a), k_b
    per = delta_a * delta_b // n
    step = delta_a // n
    ell_c = delta_a // k_a - per
    rng = np.random.default_rng(seed)
    workers = []
    for i in range(n):
        top = _cyclic(i * step, per, delta_a)
        rest = _complement(top, delta_a)
        a = [_unit(delta_a, p) for p in top] + [_coded(rng, delta_a, rest) for _ in range(ell_c)]
        b = [_coded(rng, delta_b, range(delta_b))]
        workers.append(WorkerStore(tuple(a), tuple(b)))
    params = {"k_a": k_a, "k_b": k_b, "ell_c": ell_c}
    return EncodingPlan("matmat", n, delta_a, delta_b, per + ell_c, tuple(workers),
                        "scs_matmat", seed, params)


def _baseline_kind(kind: str | None, k_b: int) -> str:
    if kind is None:
        return "matvec" if k_b == 1 else "matmat"
    if kind == "matvec" and k_b != 1:
        raise RegimeError("a matvec baseline needs k_B == 1")
    return kind


def build_polynomial_baseline(n: int, k_a: int, k_b: int = 1, eval_points=None,
                              kind: str | None = None) -> EncodingPlan:
    kind = _baseline_kind(kind, k_b)
    if k_a * k_b > n:
        raise RegimeError(f"requires k_A*k_B <= n (k_A={k_a}, k_B={k_b}, n={n})")
    pts = np.linspace(-1.0, 1.0, n) if eval_points is None else np.asarray(eval_points, dtype=float)
    if pts.shape != (n,):
        raise ValueError(f"need {n} evaluation points")
    if len(set(pts.tolist())) != n:
        raise ValueError("evaluation points must be distinct")
    workers = []
    for z in pts.tolist():
        a = CoefficientVector.from_dense([z ** i for i in range(k_a)])
        b = CoefficientVector.from_dense([z ** (k_a * j) for j in range(k_b)])
        # z == 0 leaves only the constant terms in the support
        workers.append(WorkerStore((a,), (b,) if kind == "matmat" else ()))
    params = {"k_a": k_a, "k_b": k_b}
    return EncodingPlan(kind, n, k_a, k_b if kind == "matmat" else 1, 1, tuple(workers),
                        "polynomial", 0, params, "polynomial", tuple(pts.tolist()))


def build_dense_random_baseline(n: int, k_a: int, k_b: int = 1, seed: int = 0,
                                kind: str | None = None) -> EncodingPlan:
    kind = _baseline_kind(kind, k_b)
    if k_a * k_b > n:
        raise RegimeError(f"requires k_A*k_B <= n (k_A={k_a}, k_B={k_b}, n={n})")
    rng = np.random.default_rng(seed)
    workers = []
    for _ in range(n):
        a = _coded(rng, k_a, range(k_a))
        b = (_coded(rng, k_b, range(k_b)),) if kind == "matmat" else ()
        workers.append(WorkerStore((a,), b))
    params = {"k_a": k_a, "k_b": k_b}
    return EncodingPlan(kind, n, k_a, k_b if kind == "matmat" else 1, 1, tuple(workers),
                        "dense_random", seed, params)
