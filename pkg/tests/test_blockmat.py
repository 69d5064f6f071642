import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stragcode.blockmat import (BlockPartition, CoefficientVector, ShapeError, SparseMatrix, block,
                                encode_block, generate_sparse, read_triplets, spgemm_flops, spmm_t,
                                spmv_t, write_triplets)


def test_full_density_fills_every_entry():
    assert generate_sparse(10, 10, 1.0, 3).nnz == 100


def test_density_three_percent():
    m = generate_sparse(10_000, 10_000, 0.03, 11)
    assert 0.027 <= m.nnz / 1e8 <= 0.033


def test_generation_is_deterministic():
    a = generate_sparse(100, 100, 0.05, 42)
    b = generate_sparse(100, 100, 0.05, 42)
    assert a.entries == b.entries


def test_values_lie_in_unit_interval():
    m = generate_sparse(200, 200, 0.1, 0)
    assert np.all(np.abs(m.val) <= 1.0) and np.all(m.val != 0)


def test_entries_sorted_by_column_then_row():
    m = SparseMatrix(3, 3, [2, 0, 1], [1, 1, 0], [1.0, 2.0, 3.0])
    assert m.entries == [(1, 0, 3.0), (0, 1, 2.0), (2, 1, 1.0)]
    assert m.nnz == len(m.entries)


def test_duplicates_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        SparseMatrix(2, 2, [0, 0], [1, 1], [1.0, 2.0])


def test_out_of_range_rejected():
    with pytest.raises(ShapeError):
        SparseMatrix(2, 2, [2], [0], [1.0])


def test_partition_must_divide():
    with pytest.raises(ValueError):
        BlockPartition(10, 3)
    assert BlockPartition(12, 3).block_width == 4


def test_coefficient_support_matches_nonzeros():
    c = CoefficientVector.from_dense([0.0, 2.0, 0.0, -1.0])
    assert c.support == (1, 3)
    with pytest.raises(ValueError):
        CoefficientVector(3, (0,), (0.0,))


def test_unit_coefficients_copy_the_block():
    m = generate_sparse(40, 30, 0.2, 1)
    part = BlockPartition(30, 3)
    dense = m.to_dense()
    for j in range(3):
        got = encode_block(m, part, CoefficientVector.unit(3, j)).to_dense()
        assert np.array_equal(got, dense[:, 10 * j:10 * j + 10])


def test_disjoint_supports_add_nnz():
    # blocks with disjoint row supports cannot cancel
    rows = np.arange(30)
    cols = np.concatenate([np.arange(10), 10 + np.arange(10), 20 + np.arange(10)])
    m = SparseMatrix(30, 30, rows, cols, np.ones(30))
    part = BlockPartition(30, 3)
    c = CoefficientVector(3, (0, 1, 2), (0.5, -1.5, 2.0))
    assert encode_block(m, part, c).nnz == sum(block(m, part, j).nnz for j in range(3))


def test_encoded_density_matches_expectation():
    sigma, beta = 0.03, 3
    part = BlockPartition(1500, 3)
    c = CoefficientVector(3, (0, 1, 2), (0.3, -0.7, 0.9))
    dens = [encode_block(generate_sparse(2000, 1500, sigma, s), part, c).nnz / (2000 * 500)
            for s in range(20)]
    want = 1 - (1 - sigma) ** beta
    assert abs(np.mean(dens) - want) / want < 0.10


def test_spmv_small_cases():
    eye = SparseMatrix.from_dense(np.eye(3))
    assert np.array_equal(spmv_t(eye, [1, 2, 3]), [1, 2, 3])
    assert not spmv_t(SparseMatrix.zeros(4, 3), np.ones(4)).any()


def test_spmv_against_dense():
    m = generate_sparse(50, 40, 0.2, 5)
    x = np.random.default_rng(0).normal(size=50)
    assert np.max(np.abs(spmv_t(m, x) - m.to_dense().T @ x)) < 1e-12


def test_spmm_against_dense():
    a = generate_sparse(40, 30, 0.2, 5)
    b = generate_sparse(40, 20, 0.2, 6)
    assert np.max(np.abs(spmm_t(a, b).to_dense() - a.to_dense().T @ b.to_dense())) < 1e-12
    eye = SparseMatrix.from_dense(np.eye(40))
    assert np.allclose(spmm_t(eye, b).to_dense(), b.to_dense())
    assert spmm_t(SparseMatrix.zeros(40, 30), b).nnz == 0


def test_flops_dense_and_zero():
    a = SparseMatrix.from_dense(np.ones((6, 4)))
    b = SparseMatrix.from_dense(np.ones((6, 5)))
    assert spgemm_flops(a, b) == 6 * 4 * 5
    assert spgemm_flops(SparseMatrix.zeros(6, 4), b) == 0


def test_flops_against_recount():
    a = generate_sparse(30, 20, 0.1, 2)
    b = generate_sparse(30, 10, 0.1, 3)
    da, db = a.to_dense() != 0, b.to_dense() != 0
    want = sum(int(da[k].sum()) * int(db[k].sum()) for k in range(30))
    assert spgemm_flops(a, b) == want


def test_triplet_round_trip(tmp_path):
    m = generate_sparse(20, 15, 0.2, 9)
    write_triplets(m, tmp_path / "m.txt")
    assert read_triplets(tmp_path / "m.txt").equals(m)


def test_triplet_duplicates_rejected(tmp_path):
    (tmp_path / "d.txt").write_text("2 2 2\n0 0 1.0\n0 0 2.0\n")
    with pytest.raises(ValueError, match="duplicate"):
        read_triplets(tmp_path / "d.txt")


coeff_lists = st.lists(st.floats(-2, 2, allow_nan=False).filter(lambda v: abs(v) > 1e-3),
                       min_size=4, max_size=4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), coeff_lists, coeff_lists)
def test_encoding_is_linear(seed, c1, c2):
    m = generate_sparse(30, 20, 0.3, seed)
    part = BlockPartition(20, 4)
    v1, v2 = np.array(c1), np.array(c2)
    summed = v1 + v2
    lhs = np.zeros((30, 5))
    if np.any(summed != 0):
        lhs = encode_block(m, part, CoefficientVector.from_dense(summed)).to_dense()
    rhs = (encode_block(m, part, CoefficientVector.from_dense(v1)).to_dense()
           + encode_block(m, part, CoefficientVector.from_dense(v2)).to_dense())
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2, 3, 4, 6, 12]))
def test_blocks_reassemble_the_matrix(seed, k):
    m = generate_sparse(25, 24, 0.2, seed)
    part = BlockPartition(24, k)
    stacked = np.hstack([block(m, part, j).to_dense() for j in range(k)])
    assert np.array_equal(stacked, m.to_dense())


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60), st.integers(1, 30), st.integers(0, 10_000))
def test_products_match_dense(p, u, v, seed):
    a = generate_sparse(p, u, 0.3, seed)
    b = generate_sparse(p, v, 0.3, seed + 1)
    x = np.linspace(-1, 1, p)
    assert np.max(np.abs(spmv_t(a, x) - a.to_dense().T @ x), initial=0) < 1e-12
    assert np.max(np.abs(spmm_t(a, b).to_dense() - a.to_dense().T @ b.to_dense()), initial=0) < 1e-12
