"""Linear systems implied by a plan and a computation state.

Decodability means the assembled system has full column rank for generic
coefficients. Three ways to test it:

* ``prime``: substitute random elements of GF(2^61 - 1) for the free
  coefficients (one set per stored coded block, so the Kronecker sharing
  inside a matmat worker is kept) and row-reduce. A random substitution can
  only lose rank, never gain it, so one full-rank trial certifies the
  generic rank; a second trial is run only to confirm a deficient answer.
* ``hall``: for matvec plans whose rows carry independent coefficients, the
  generic rank equals the size of a maximum matching between unknowns and
  rows, so a saturating matching decides it exactly.
* ``numeric``: the plan's own real coefficients and an SVD rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _field
from .blockmat import SparseMatrix
from .schemes import EncodingPlan

SVD_RTOL = 1e-12


class DecodeError(RuntimeError):
    def __init__(self, message: str, kappa: float = float("inf"), residual: float = float("nan")):
        super().__init__(message)
        self.kappa = kappa
        self.residual = residual


class UnsupportedPlan(ValueError):
    pass


@dataclass(frozen=True)
class LinearSystem:
    rows: np.ndarray
    labels: tuple[tuple[int, int], ...]
    sources: tuple[tuple[int, int], ...]  # (worker, task position) per row


def check_state(plan: EncodingPlan, state) -> np.ndarray:
    w = np.asarray(state, dtype=np.int64)
    if w.shape != (plan.n,):
        raise ValueError(f"state has {w.shape} entries, plan has {plan.n} workers")
    if (w < 0).any() or (w > plan.ell).any():
        raise ValueError(f"state entries must lie in [0, {plan.ell}]")
    return w


def unknown_labels(plan: EncodingPlan) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for i in range(plan.delta_a) for j in range(plan.delta_b))


def assemble(plan: EncodingPlan, state) -> LinearSystem:
    w = check_state(plan, state)
    rows, sources = [], []
    for i in range(plan.n):
        for task in plan.tasks(i)[: w[i]]:
            rows.append(plan.task_row(task))
            sources.append((i, task.position))
    mat = np.array(rows) if rows else np.zeros((0, plan.delta))
    return LinearSystem(mat, unknown_labels(plan), tuple(sources))


def numeric_rank(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    return int((sv > max(m.shape) * sv[0] * SVD_RTOL).sum())


def hall_applicable(plan: EncodingPlan) -> bool:
    return plan.kind == "matvec" and plan.structure == "generic"


def support_mask(plan: EncodingPlan) -> np.ndarray:
    mask = np.zeros((plan.n, plan.ell, plan.delta), dtype=bool)
    for i in range(plan.n):
        for task in plan.tasks(i):
            mask[i, task.position, list(plan.task_support(task))] = True
    return mask


def field_rows(plan: EncodingPlan, trial: int) -> np.ndarray:
    """(n, ell, delta) array of rows with coefficients drawn from GF(p)."""
    rng = np.random.default_rng([plan.seed, trial, 0x5EED])
    p = _field.PRIME

    def rand_vec(c):
        v = np.zeros(c.length, dtype=np.uint64)
        v[list(c.support)] = rng.integers(1, p, size=len(c.support), dtype=np.uint64)
        return v

    out = np.zeros((plan.n, plan.ell, plan.delta), dtype=np.uint64)
    for i in range(plan.n):
        store = plan.workers[i]
        if plan.structure == "polynomial":
            z = np.uint64(rng.integers(1, p, dtype=np.uint64))
            a = [np.array([_field.powmod(z, k) for k in range(plan.delta_a)], dtype=np.uint64)]
            if plan.kind == "matmat":
                b = [np.array([_field.powmod(z, plan.delta_a * k) for k in range(plan.delta_b)],
                              dtype=np.uint64)]
            else:
                b = [np.ones(1, dtype=np.uint64)]
        else:
            a = [rand_vec(c) for c in store.a]
            b = [rand_vec(c) for c in store.b] if plan.kind == "matmat" else [np.ones(1, dtype=np.uint64)]
        t = 0
        for va in a:
            for vb in b:
                out[i, t] = _field.kron_mod(va, vb)
                t += 1
    return out


class Checker:
    """Reusable decodability test for one plan.

    mode is one of "auto" (Hall when exact, else prime), "prime", "hall",
    "numeric".
    """

    def __init__(self, plan: EncodingPlan, mode: str = "auto", trials: int = 2):
        if mode == "auto":
            mode = "hall" if hall_applicable(plan) else "prime"
        if mode == "hall" and not hall_applicable(plan):
            raise UnsupportedPlan("Hall test needs a matvec plan with independent row coefficients")
        if mode not in ("hall", "prime", "numeric"):
            raise ValueError(f"unknown mode {mode!r}")
        self.plan = plan
        self.mode = mode
        self.calls = 0
        if mode == "hall":
            self._mask = support_mask(plan)
        elif mode == "prime":
            self._rows = [field_rows(plan, k) for k in range(trials)]
        else:
            self._real = np.zeros((plan.n, plan.ell, plan.delta))
            for i in range(plan.n):
                for task in plan.tasks(i):
                    self._real[i, task.position] = plan.task_row(task)

    def __call__(self, state) -> bool:
        w = np.ascontiguousarray(state, dtype=np.int64)
        self.calls += 1
        if w.sum() < self.plan.delta:
            return False
        if self.mode == "hall":
            return bool(_field.state_saturating_matching(self._mask, w))
        if self.mode == "prime":
            return any(_field.state_full_rank(rows, w) for rows in self._rows)
        m = np.concatenate([self._real[i, : w[i]] for i in range(self.plan.n)])
        return numeric_rank(m) == self.plan.delta


def is_decodable(plan: EncodingPlan, state, mode: str = "prime") -> bool:
    check_state(plan, state)
    return Checker(plan, mode)(state)


def hall_decodable_matvec(plan: EncodingPlan, state) -> bool:
    check_state(plan, state)
    return Checker(plan, "hall")(state)


def _flatten_product(p, plan: EncodingPlan) -> np.ndarray:
    if isinstance(p, SparseMatrix):
        p = p.to_dense()
    return np.asarray(p, dtype=np.float64).ravel()


def decode(plan: EncodingPlan, state, products, rtol: float = 1e-8):
    """Recover every unknown block from the finished tasks.

    ``products[i][t]`` is the result of task t on worker i (a vector for
    matvec, a dense or sparse block for matmat); only tasks inside ``state``
    are read. Returns A^T x as a vector or A^T B as a dense matrix.
    """
    system = assemble(plan, state)
    m = system.rows
    if m.shape[0] < plan.delta:
        raise DecodeError(f"{m.shape[0]} equations for {plan.delta} unknowns")
    rhs = np.stack([_flatten_product(products[i][t], plan) for i, t in system.sources])
    first = products[system.sources[0][0]][system.sources[0][1]]
    unit = _unit_rows(m)
    if unit is not None:
        # every unknown arrived uncoded: copy it through untouched
        return _reshape_solution(plan, rhs[unit], first)
    sv = np.linalg.svd(m, compute_uv=False)
    kappa = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if (sv > max(m.shape) * sv[0] * SVD_RTOL).sum() < plan.delta:
        raise DecodeError("system is rank deficient", kappa)
    sol, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    scale = np.linalg.norm(rhs)
    residual = float(np.linalg.norm(m @ sol - rhs) / scale) if scale > 0 else 0.0
    if residual > rtol and kappa < 1e8:
        raise DecodeError(f"residual {residual:.3g} above {rtol:g}", kappa, residual)
    return _reshape_solution(plan, sol, first)


def _unit_rows(m: np.ndarray):
    """Index of one row equal to e_k for every unknown k, or None."""
    pick = np.full(m.shape[1], -1)
    nz = m != 0
    for r in np.flatnonzero(nz.sum(axis=1) == 1):
        k = int(np.flatnonzero(nz[r])[0])
        if m[r, k] == 1.0 and pick[k] < 0:
            pick[k] = r
    return None if (pick < 0).any() else pick


def _reshape_solution(plan: EncodingPlan, sol: np.ndarray, first):
    if plan.kind == "matvec":
        return sol.reshape(-1)
    blocks = sol.reshape(plan.delta_a, plan.delta_b, *first.shape)
    return np.block([[blocks[i, j] for j in range(plan.delta_b)] for i in range(plan.delta_a)])


def condition_number(plan: EncodingPlan, survivors) -> float:
    """sigma_max / sigma_min of the system from fully finished survivors."""
    surv = set(int(i) for i in survivors)
    state = [plan.ell if i in surv else 0 for i in range(plan.n)]
    m = assemble(plan, state).rows
    if m.shape[0] < plan.delta:
        return float("inf")
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= max(m.shape) * sv[0] * SVD_RTOL:
        return float("inf")
    return float(sv[0] / sv[-1])
