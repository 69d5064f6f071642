"""Parallel classes, resolvable designs and the cyclic assignment."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class ParallelClass:
    num_points: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(p) for p in b)) for b in self.blocks)
        if not blocks:
            raise DesignError("a parallel class needs at least one block")
        sizes = {len(b) for b in blocks}
        if len(sizes) != 1:
            raise DesignError(f"blocks of unequal sizes {sorted(sizes)}")
        flat = [p for b in blocks for p in b]
        if sorted(flat) != list(range(self.num_points)):
            raise DesignError(f"blocks do not partition {{0..{self.num_points - 1}}}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def block_size(self) -> int:
        return len(self.blocks[0])

    def canonical(self) -> ParallelClass:
        return ParallelClass(self.num_points, sorted(self.blocks))


@dataclass(frozen=True)
class DesignSet:
    num_points: int
    classes: tuple[ParallelClass, ...]

    def __post_init__(self):
        classes = tuple(self.classes)
        if not classes:
            raise DesignError("empty design set")
        for c in classes:
            if c.num_points != self.num_points:
                raise DesignError("classes disagree on the number of points")
            if c.block_size != classes[0].block_size:
                raise DesignError("classes disagree on block size")
        object.__setattr__(self, "classes", classes)

    @property
    def block_size(self) -> int:
        return self.classes[0].block_size

    @classmethod
    def from_lists(cls, num_points: int, classes) -> DesignSet:
        return cls(num_points, tuple(ParallelClass(num_points, tuple(map(tuple, c))) for c in classes))

    def select(self, indices) -> DesignSet:
        return DesignSet(self.num_points, tuple(self.classes[i] for i in indices))

    def to_json(self) -> dict:
        return {"points": self.num_points,
                "classes": [[list(b) for b in c.blocks] for c in self.classes]}

    @classmethod
    def from_json(cls, data: dict) -> DesignSet:
        return cls.from_lists(int(data["points"]), data["classes"])


@dataclass(frozen=True)
class CyclicLayout:
    num_symbols: int
    num_workers: int
    per_worker: int
    assignment: tuple[tuple[int, ...], ...]


def cyclic_assignment(delta: int, n: int, ell: int) -> CyclicLayout:
    """Worker j gets symbols j, j+1, ..., j+ell-1 (mod delta), in that order."""
    if n != delta:
        raise DesignError("cyclic assignment needs n == delta; tile groups for other n")
    if not 0 <= ell <= delta:
        raise DesignError(f"ell={ell} must lie in [0, {delta}]")
    rows = tuple(tuple((j + t) % delta for t in range(ell)) for j in range(n))
    return CyclicLayout(delta, n, ell, rows)


def alpha_c(delta: int, ell: int, c: int) -> int:
    """Most symbols a cyclic (delta, ell) layout can process while one fixed
    symbol is processed exactly c times."""
    if not 0 <= c <= ell:
        raise DesignError(f"c={c} must lie in [0, ell={ell}]")
    return delta * ell - ell * (ell + 1) // 2 + sum(ell - i for i in range(c))


def trivial_classes(delta: int, beta: int, count: int) -> DesignSet:
    if beta < 1 or delta % beta:
        raise DesignError(f"beta={beta} does not divide delta={delta}")
    if count < 1:
        raise DesignError("count must be positive")
    blocks = tuple(tuple(range(i, i + beta)) for i in range(0, delta, beta))
    return DesignSet(delta, (ParallelClass(delta, blocks),) * count)


def shifted_pair_classes(delta: int) -> DesignSet:
    """Two classes of pairs: {2i, 2i+1} and {2i, 2i+5} (mod delta).

    The second class keeps the order given by i, it is not re-sorted, since
    block order fixes where meta-symbols land in a worker's list.
    """
    if delta % 2 or delta < 8:
        raise DesignError(f"shifted pair classes need even delta >= 8, got {delta}")
    half = delta // 2
    p0 = tuple((2 * i, 2 * i + 1) for i in range(half))
    p1 = tuple((2 * i, (2 * i + 5) % delta) for i in range(half))
    return DesignSet(delta, (ParallelClass(delta, p0), ParallelClass(delta, p1)))


# A resolution of the Steiner triple system on 15 points (Kirkman's schoolgirl
# problem), taken from a packing of PG(3, 2) into seven line-disjoint spreads.
_KIRKMAN = (
    ((0, 1, 2), (3, 7, 11), (4, 9, 14), (5, 10, 12), (6, 8, 13)),
    ((0, 3, 4), (1, 7, 9), (2, 12, 13), (5, 8, 14), (6, 10, 11)),
    ((0, 5, 6), (1, 8, 10), (2, 11, 14), (3, 9, 13), (4, 7, 12)),
    ((0, 7, 8), (1, 11, 13), (2, 4, 5), (3, 10, 14), (6, 9, 12)),
    ((0, 9, 10), (1, 12, 14), (2, 3, 6), (4, 8, 11), (5, 7, 13)),
    ((0, 11, 12), (1, 3, 5), (2, 8, 9), (4, 10, 13), (6, 7, 14)),
    ((0, 13, 14), (1, 4, 6), (2, 7, 10), (3, 8, 12), (5, 9, 11)),
)


def kirkman_classes() -> DesignSet:
    return DesignSet.from_lists(15, _KIRKMAN)


def incidence_matrix(design) -> np.ndarray:
    """Points x blocks 0/1 matrix; blocks listed class by class."""
    if isinstance(design, ParallelClass):
        design = DesignSet(design.num_points, (design,))
    blocks = [b for c in design.classes for b in c.blocks]
    out = np.zeros((design.num_points, len(blocks)), dtype=np.int64)
    for j, b in enumerate(blocks):
        out[list(b), j] = 1
    return out


def product_class(a: ParallelClass, b: ParallelClass) -> ParallelClass:
    nb = b.num_points
    blocks = tuple(tuple(p * nb + q for p in ba for q in bb) for ba in a.blocks for bb in b.blocks)
    return ParallelClass(a.num_points * nb, blocks)


def max_cross_intersection(design: DesignSet) -> int:
    """Largest |B ∩ B'| over blocks B, B' taken from two distinct classes."""
    worst = 0
    for c1, c2 in combinations(design.classes, 2):
        if c1 == c2:
            return design.block_size
        for b1 in c1.blocks:
            s1 = set(b1)
            for b2 in c2.blocks:
                worst = max(worst, len(s1.intersection(b2)))
    return worst


def check_cross_intersection(design: DesignSet, limit: int = 1) -> None:
    m = max_cross_intersection(design)
    if m > limit:
        raise DesignError(f"blocks from different classes share {m} points (limit {limit})")


def load_design(path) -> DesignSet:
    return DesignSet.from_json(json.loads(Path(path).read_text()))


def save_design(design: DesignSet, path) -> None:
    Path(path).write_text(json.dumps(design.to_json()) + "\n")
