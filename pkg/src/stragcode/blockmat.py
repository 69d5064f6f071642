"""Sparse matrices with block-column partitioning and random block encoding.

Matrices are stored as coordinate triplets sorted by (col, row). Products go
through scipy's compressed formats; the triplet form is what the rest of the
package (and the text file format) sees.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    rows: int
    cols: int
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray

    def __post_init__(self):
        row = np.asarray(self.row, dtype=np.int64)
        col = np.asarray(self.col, dtype=np.int64)
        val = np.asarray(self.val, dtype=np.float64)
        if not (row.shape == col.shape == val.shape) or row.ndim != 1:
            raise ShapeError("row/col/val must be 1-d arrays of equal length")
        if self.rows < 0 or self.cols < 0:
            raise ShapeError("negative dimension")
        if row.size:
            if row.min() < 0 or row.max() >= self.rows or col.min() < 0 or col.max() >= self.cols:
                raise ShapeError("entry index out of range")
        order = np.lexsort((row, col))
        row, col, val = row[order], col[order], val[order]
        if row.size > 1:
            dup = (row[1:] == row[:-1]) & (col[1:] == col[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry at ({row[k]}, {col[k]})")
        for name, arr in (("row", row), ("col", col), ("val", val)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.val.size)

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return list(zip(self.row.tolist(), self.col.tolist(), self.val.tolist()))

    def to_scipy(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.val, (self.row, self.col)), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row, self.col] = self.val
        return out

    @classmethod
    def from_scipy(cls, m) -> SparseMatrix:
        coo = sp.coo_matrix(m)
        coo.sum_duplicates()
        keep = coo.data != 0
        return cls(coo.shape[0], coo.shape[1], coo.row[keep], coo.col[keep], coo.data[keep])

    @classmethod
    def from_dense(cls, a) -> SparseMatrix:
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], r, c, a[r, c])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> SparseMatrix:
        e = np.zeros(0)
        return cls(rows, cols, e, e, e)

    def equals(self, other: SparseMatrix) -> bool:
        return (self.shape == other.shape and np.array_equal(self.row, other.row)
                and np.array_equal(self.col, other.col) and np.array_equal(self.val, other.val))


@dataclass(frozen=True)
class BlockPartition:
    total_cols: int
    num_blocks: int

    def __post_init__(self):
        if self.num_blocks < 1 or self.total_cols % self.num_blocks:
            raise ShapeError(f"{self.num_blocks} blocks do not divide {self.total_cols} columns")

    @property
    def block_width(self) -> int:
        return self.total_cols // self.num_blocks


@dataclass(frozen=True)
class CoefficientVector:
    """Sparse coefficient vector over the block-columns of one matrix.

    Only the support is stored; ``values[k]`` belongs to block ``support[k]``.
    """

    length: int
    support: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        values = tuple(float(v) for v in self.values)
        if len(support) != len(values):
            raise ShapeError("support and values differ in length")
        if len(set(support)) != len(support):
            raise ValueError("repeated index in support")
        if any(i < 0 or i >= self.length for i in support):
            raise ShapeError("support index out of range")
        if any(v == 0.0 for v in values):
            raise ValueError("zero value listed in support")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @classmethod
    def unit(cls, length: int, i: int, value: float = 1.0) -> CoefficientVector:
        return cls(length, (i,), (value,))

    @classmethod
    def from_dense(cls, values) -> CoefficientVector:
        values = np.asarray(values, dtype=np.float64)
        idx = np.flatnonzero(values)
        return cls(values.size, tuple(idx.tolist()), tuple(values[idx].tolist()))

    def dense(self) -> np.ndarray:
        out = np.zeros(self.length)
        out[list(self.support)] = self.values
        return out


def generate_sparse(rows: int, cols: int, density: float, seed: int) -> SparseMatrix:
    """Bernoulli(density) sparsity pattern with values uniform on [-1, 1]."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    # chunk over rows so the mask never exceeds ~4M entries
    step = max(1, (1 << 22) // cols)
    rs, cs = [], []
    for r0 in range(0, rows, step):
        h = min(step, rows - r0)
        r, c = np.nonzero(rng.random((h, cols)) < density)
        rs.append(r + r0)
        cs.append(c)
    r = np.concatenate(rs)
    c = np.concatenate(cs)
    v = rng.uniform(-1.0, 1.0, size=r.size)
    v[v == 0.0] = 1.0
    return SparseMatrix(rows, cols, r, c, v)


def block(matrix: SparseMatrix, partition: BlockPartition, i: int) -> SparseMatrix:
    return encode_block(matrix, partition, CoefficientVector.unit(partition.num_blocks, i))


def encode_block(matrix: SparseMatrix, partition: BlockPartition,
                 coeffs: CoefficientVector) -> SparseMatrix:
    """Return sum_i coeffs[i] * M_i over the block-columns M_i of ``matrix``."""
    if partition.total_cols != matrix.cols:
        raise ShapeError("partition does not match matrix width")
    if coeffs.length != partition.num_blocks:
        raise ShapeError(f"coefficient length {coeffs.length} != {partition.num_blocks} blocks")
    w = partition.block_width
    scale = coeffs.dense()
    blk = matrix.col // w
    keep = scale[blk] != 0
    data = matrix.val[keep] * scale[blk[keep]]
    out = sp.coo_matrix((data, (matrix.row[keep], matrix.col[keep] % w)), shape=(matrix.rows, w))
    return SparseMatrix.from_scipy(out)


def spmv_t(matrix: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (matrix.rows,):
        raise ShapeError(f"vector of length {x.shape} for {matrix.rows} rows")
    return matrix.to_scipy().T @ x


def spmm_t(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    if a.rows != b.rows:
        raise ShapeError(f"row mismatch {a.rows} vs {b.rows}")
    return SparseMatrix.from_scipy(a.to_scipy().T.tocsr() @ b.to_scipy().tocsc())


def spgemm_flops(a: SparseMatrix, b: SparseMatrix) -> int:
    """Multiply-add count of A^T B: sum over rows k of nnz(a[k]) * nnz(b[k])."""
    if a.rows != b.rows:
        raise ShapeError(f"row mismatch {a.rows} vs {b.rows}")
    na = np.bincount(a.row, minlength=a.rows)
    nb = np.bincount(b.row, minlength=b.rows)
    return int(na @ nb)


def read_triplets(path) -> SparseMatrix:
    header = None
    rows, cols, vals = [], [], []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            header = tuple(int(p) for p in parts)
            if len(header) != 3:
                raise ValueError("header must be 'rows cols nnz'")
            continue
        if len(parts) != 3:
            raise ValueError(f"bad triplet line: {raw!r}")
        rows.append(int(parts[0]))
        cols.append(int(parts[1]))
        vals.append(float(parts[2]))
    if header is None:
        raise ValueError("missing header")
    if len(vals) != header[2]:
        raise ValueError(f"header says {header[2]} entries, found {len(vals)}")
    return SparseMatrix(header[0], header[1], np.array(rows, dtype=np.int64),
                        np.array(cols, dtype=np.int64), np.array(vals))


def write_triplets(matrix: SparseMatrix, path) -> None:
    lines = [f"{matrix.rows} {matrix.cols} {matrix.nnz}"]
    lines += [f"{r} {c} {v!r}" for r, c, v in matrix.entries]
    Path(path).write_text("\n".join(lines) + "\n")
