import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dpcsim.gf2 import (
    Gf2Matrix,
    bits_to_hex,
    hex_to_bits,
    mat_vec_mul,
    pack_rows,
    rank,
    read_alist,
    row_reduce,
    solve,
    unpack_rows,
    write_alist,
)
from oracles import dense_rank

bit_matrices = st.tuples(st.integers(1, 9), st.integers(1, 140)).flatmap(
    lambda shape: arrays(np.uint8, shape, elements=st.integers(0, 1))
)


def test_mat_vec_matches_dense_product(rng):
    a = rng.integers(0, 2, (8, 12), dtype=np.uint8)
    v = rng.integers(0, 2, 12, dtype=np.uint8)
    naive = np.array([sum(int(a[i, j]) * int(v[j]) for j in range(12)) % 2 for i in range(8)])
    assert np.array_equal(mat_vec_mul(Gf2Matrix.from_dense(a), v), naive)


def test_rank_matches_dense_elimination(rng):
    for _ in range(20):
        a = rng.integers(0, 2, (10, 20), dtype=np.uint8)
        assert rank(Gf2Matrix.from_dense(a)) == dense_rank(a)


def test_rank_of_deficient_matrix():
    a = np.array([[1, 0, 1], [0, 1, 1], [1, 1, 0]], dtype=np.uint8)
    assert rank(Gf2Matrix.from_dense(a)) == 2


@settings(max_examples=60, deadline=None)
@given(bit_matrices)
def test_row_reduce_properties(a):
    m = Gf2Matrix.from_dense(a)
    red, pivots, r = row_reduce(m)
    d = red.to_dense()
    assert r == dense_rank(a) == len(pivots)
    assert not d[r:].any()
    for i, p in enumerate(pivots):
        col = d[:, p]
        assert col[i] == 1 and col.sum() == 1
    # same row space: stacking adds no rank
    assert dense_rank(np.vstack([a, d])) == r


@settings(max_examples=60, deadline=None)
@given(bit_matrices)
def test_pack_unpack_round_trip(a):
    assert np.array_equal(unpack_rows(pack_rows(a), a.shape[1]), a)


@settings(max_examples=40, deadline=None)
@given(bit_matrices, st.integers(0, 2**32 - 1))
def test_solve_consistent_systems(a, seed):
    x0 = np.random.default_rng(seed).integers(0, 2, a.shape[1], dtype=np.uint8)
    m = Gf2Matrix.from_dense(a)
    b = mat_vec_mul(m, x0)
    x = solve(m, b)
    assert x is not None
    assert np.array_equal(mat_vec_mul(m, x), b)


def test_solve_reports_inconsistency():
    m = Gf2Matrix.from_dense([[1, 1], [1, 1]])
    assert solve(m, [1, 0]) is None


def test_transpose_and_permutation(rng):
    a = rng.integers(0, 2, (5, 9), dtype=np.uint8)
    m = Gf2Matrix.from_dense(a)
    assert np.array_equal(m.T.to_dense(), a.T)
    perm = rng.permutation(9)
    assert np.array_equal(m.permute_columns(perm).to_dense(), a[:, perm])
    assert np.array_equal(m.row_degrees(), a.sum(1))
    assert np.array_equal(m.col_degrees(), a.sum(0))


def test_identity_and_zeros():
    assert np.array_equal(Gf2Matrix.identity(4).to_dense(), np.eye(4, dtype=np.uint8))
    assert Gf2Matrix.zeros(3, 5).nnz == 0


@settings(max_examples=30, deadline=None)
@given(bit_matrices)
def test_alist_round_trip(tmp_path_factory, a):
    path = tmp_path_factory.mktemp("alist") / "m.alist"
    m = Gf2Matrix.from_dense(a)
    write_alist(m, path)
    assert read_alist(path) == m


def test_alist_layout(tmp_path):
    m = Gf2Matrix.from_dense([[1, 1, 0], [0, 1, 1]])
    write_alist(m, tmp_path / "h.alist")
    lines = (tmp_path / "h.alist").read_text().splitlines()
    assert lines[:4] == ["3 2", "2 2", "1 2 1", "2 2"]
    assert lines[4:] == ["1 0", "1 2", "2 0", "1 2", "2 3"]


def test_alist_rejects_inconsistent_sections(tmp_path):
    p = tmp_path / "bad.alist"
    p.write_text("3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 3\n2 3\n")
    with pytest.raises(ValueError):
        read_alist(p)


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.integers(0, 200), elements=st.integers(0, 1)))
def test_hex_round_trip(bits):
    assert np.array_equal(hex_to_bits(bits_to_hex(bits), bits.size), bits)


def test_hex_is_msb_first():
    assert bits_to_hex(np.array([1, 0, 0, 0, 0, 0, 0, 1, 1], dtype=np.uint8)) == "8180"
