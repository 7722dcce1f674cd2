"""Binary vectors and sparse GF(2) matrices.

Bit vectors are plain ``numpy.uint8`` arrays holding 0/1. Index 0 is the first
transmitted (most significant) position everywhere in the package.

Dense work (elimination, generator derivation) is done on packed rows of
``uint64`` words: column ``c`` lives in word ``c // 64`` at bit ``c % 64``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

WORD = 64


def as_bits(v) -> np.ndarray:
    """Return ``v`` as a contiguous uint8 0/1 array, rejecting other values."""
    arr = np.ascontiguousarray(v, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit vector must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit vector entries must be 0 or 1")
    return arr


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def bits_to_hex(bits: np.ndarray) -> str:
    """MSB-first hex encoding, zero-padded on the right to a whole byte."""
    return np.packbits(as_bits(bits)).tobytes().hex()


def hex_to_bits(text: str, length: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
    return np.unpackbits(raw)[:length].copy()


# ---------------------------------------------------------------------------
# packed-word helpers
# ---------------------------------------------------------------------------

def n_words(cols: int) -> int:
    return (cols + WORD - 1) // WORD


def pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a dense 0/1 matrix (rows x cols) into rows of uint64 words."""
    dense = np.asarray(dense, dtype=np.uint8)
    rows, cols = dense.shape
    padded = np.zeros((rows, n_words(cols) * WORD), dtype=np.uint8)
    padded[:, :cols] = dense
    by_byte = np.packbits(padded, axis=1, bitorder="little")
    return by_byte.view("<u8").astype(np.uint64, copy=False).reshape(rows, -1)


def unpack_rows(packed: np.ndarray, cols: int) -> np.ndarray:
    packed = np.ascontiguousarray(packed, dtype="<u8")
    by_byte = packed.view(np.uint8).reshape(packed.shape[0], -1)
    return np.unpackbits(by_byte, axis=1, bitorder="little")[:, :cols]


def pack_vector(v: np.ndarray) -> np.ndarray:
    return pack_rows(np.asarray(v, dtype=np.uint8)[None, :])[0]


@numba.njit(cache=True, nogil=True)
def _gauss_jordan(a, cols, col_order):
    """In-place Gauss-Jordan on packed rows; columns visited in ``col_order``.

    Returns (pivot columns, rank). Row ``i < rank`` holds the pivot for
    ``pivots[i]`` and that column is zero in every other row.
    """
    rows, nw = a.shape
    pivots = np.empty(min(rows, cols), dtype=np.int64)
    rank = 0
    for c in col_order:
        if rank == rows:
            break
        w = c >> 6
        mask = np.uint64(1) << np.uint64(c & 63)
        piv = -1
        for r in range(rank, rows):
            if a[r, w] & mask:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for j in range(nw):
                tmp = a[piv, j]
                a[piv, j] = a[rank, j]
                a[rank, j] = tmp
        for r in range(rows):
            if r != rank and (a[r, w] & mask):
                for j in range(nw):
                    a[r, j] ^= a[rank, j]
        pivots[rank] = c
        rank += 1
    return pivots[:rank], rank


def gauss_jordan_packed(packed: np.ndarray, cols: int, col_order=None):
    """Reduce packed rows in place to reduced row-echelon form.

    ``col_order`` sets the pivot search order (default: left to right).
    Returns ``(pivots, rank)``.
    """
    if col_order is None:
        col_order = np.arange(cols, dtype=np.int64)
    pivots, rank = _gauss_jordan(packed, cols, np.asarray(col_order, dtype=np.int64))
    return pivots, int(rank)


@numba.njit(cache=True, nogil=True)
def packed_mat_vec(a, v):
    """Parity of popcount(row & v) for each packed row."""
    rows, nw = a.shape
    out = np.zeros(rows, dtype=np.uint8)
    for r in range(rows):
        acc = np.uint64(0)
        for j in range(nw):
            acc ^= a[r, j] & v[j]
        # fold the word down to its parity
        acc ^= acc >> np.uint64(32)
        acc ^= acc >> np.uint64(16)
        acc ^= acc >> np.uint64(8)
        acc ^= acc >> np.uint64(4)
        acc ^= acc >> np.uint64(2)
        acc ^= acc >> np.uint64(1)
        out[r] = np.uint8(acc & np.uint64(1))
    return out


# ---------------------------------------------------------------------------
# sparse matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Gf2Matrix:
    """Sparse binary matrix stored as sorted (row, col) coordinates of its ones."""

    rows: int
    cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.row_idx, dtype=np.int64)
        c = np.asarray(self.col_idx, dtype=np.int64)
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("matrix dimensions must be positive")
        if r.shape != c.shape:
            raise ValueError("row/col index arrays differ in length")
        if r.size and (r.min() < 0 or r.max() >= self.rows or c.min() < 0 or c.max() >= self.cols):
            raise ValueError("index out of range")
        key = r * self.cols + c
        order = np.argsort(key, kind="stable")
        key = key[order]
        if key.size > 1 and np.any(key[1:] == key[:-1]):
            raise ValueError("duplicate positions in sparse matrix")
        r, c = r[order], c[order]
        r.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "row_idx", r)
        object.__setattr__(self, "col_idx", c)

    @classmethod
    def from_dense(cls, dense) -> Gf2Matrix:
        dense = np.asarray(dense)
        if dense.ndim != 2:
            raise ValueError("dense matrix must be 2-D")
        r, c = np.nonzero(dense & 1 if dense.dtype.kind in "iu" else dense.astype(np.uint8) & 1)
        return cls(dense.shape[0], dense.shape[1], r, c)

    @classmethod
    def identity(cls, n: int) -> Gf2Matrix:
        idx = np.arange(n)
        return cls(n, n, idx, idx)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> Gf2Matrix:
        empty = np.zeros(0, dtype=np.int64)
        return cls(rows, cols, empty, empty)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def nnz(self) -> int:
        return int(self.row_idx.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.uint8)
        out[self.row_idx, self.col_idx] = 1
        return out

    def to_packed(self) -> np.ndarray:
        out = np.zeros((self.rows, n_words(self.cols)), dtype=np.uint64)
        words = self.col_idx >> 6
        bits = np.left_shift(np.uint64(1), (self.col_idx & 63).astype(np.uint64))
        np.bitwise_xor.at(out, (self.row_idx, words), bits)
        return out

    def transpose(self) -> Gf2Matrix:
        return Gf2Matrix(self.cols, self.rows, self.col_idx, self.row_idx)

    T = property(transpose)

    def permute_columns(self, perm: np.ndarray) -> Gf2Matrix:
        """Return ``M[:, perm]``: new column j is old column ``perm[j]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        return Gf2Matrix(self.rows, self.cols, self.row_idx, inverse[self.col_idx])

    def row_degrees(self) -> np.ndarray:
        return np.bincount(self.row_idx, minlength=self.rows)

    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.col_idx, minlength=self.cols)

    def row_lists(self) -> list[np.ndarray]:
        bounds = np.searchsorted(self.row_idx, np.arange(self.rows + 1))
        return [self.col_idx[bounds[i]:bounds[i + 1]] for i in range(self.rows)]

    def col_lists(self) -> list[np.ndarray]:
        order = np.argsort(self.col_idx, kind="stable")
        rows_by_col = self.row_idx[order]
        bounds = np.searchsorted(self.col_idx[order], np.arange(self.cols + 1))
        return [rows_by_col[bounds[j]:bounds[j + 1]] for j in range(self.cols)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Gf2Matrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_idx, other.row_idx)
            and np.array_equal(self.col_idx, other.col_idx)
        )

    def __repr__(self) -> str:
        return f"Gf2Matrix({self.rows}x{self.cols}, nnz={self.nnz})"


def mat_vec_mul(m: Gf2Matrix, v) -> np.ndarray:
    """Product ``M v`` over GF(2)."""
    v = as_bits(v)
    if v.size != m.cols:
        raise ValueError(f"vector length {v.size} does not match {m.cols} columns")
    acc = np.bincount(m.row_idx, weights=v[m.col_idx], minlength=m.rows)
    return (acc.astype(np.int64) & 1).astype(np.uint8)


def row_reduce(m: Gf2Matrix) -> tuple[Gf2Matrix, list[int], int]:
    """Reduced row-echelon form of ``m``.

    Returns ``(reduced, pivots, rank)``. Rows past ``rank`` of ``reduced`` are
    zero; the row space of ``m`` is preserved.
    """
    packed = m.to_packed()
    pivots, rank = gauss_jordan_packed(packed, m.cols)
    reduced = Gf2Matrix.from_dense(unpack_rows(packed, m.cols))
    return reduced, [int(p) for p in pivots], rank


def rank(m: Gf2Matrix) -> int:
    return row_reduce(m)[2]


def solve(m: Gf2Matrix, b) -> np.ndarray | None:
    """One solution ``x`` of ``M x = b`` (free variables zero), or None."""
    b = as_bits(b)
    if b.size != m.rows:
        raise ValueError("right-hand side length mismatch")
    aug = np.concatenate([m.to_dense(), b[:, None]], axis=1)
    packed = pack_rows(aug)
    pivots, r = gauss_jordan_packed(packed, m.cols)
    reduced = unpack_rows(packed, m.cols + 1)
    if np.any(reduced[r:, m.cols]):
        return None
    x = np.zeros(m.cols, dtype=np.uint8)
    x[pivots] = reduced[:r, m.cols]
    return x


# ---------------------------------------------------------------------------
# alist I/O
# ---------------------------------------------------------------------------

def write_alist(m: Gf2Matrix, path) -> None:
    """Write ``m`` in MacKay's alist format (1-based, zero-padded lists)."""
    cols = m.col_lists()
    rows = m.row_lists()
    col_deg = [len(c) for c in cols]
    row_deg = [len(r) for r in rows]
    max_c = max(col_deg, default=0)
    max_r = max(row_deg, default=0)

    def padded(entries, width):
        vals = [str(int(e) + 1) for e in entries] + ["0"] * (width - len(entries))
        return " ".join(vals)

    lines = [
        f"{m.cols} {m.rows}",
        f"{max_c} {max_r}",
        " ".join(map(str, col_deg)),
        " ".join(map(str, row_deg)),
    ]
    # an all-zero row or column still needs a line, so pad to at least one entry
    lines += [padded(c, max(max_c, 1)) for c in cols]
    lines += [padded(r, max(max_r, 1)) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path) -> Gf2Matrix:
    tokens = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
    n, m = map(int, tokens[0])
    col_deg = list(map(int, tokens[2]))
    row_deg = list(map(int, tokens[3]))
    if len(col_deg) != n or len(row_deg) != m:
        raise ValueError("alist degree lines do not match dimensions")
    r_idx, c_idx = [], []
    for j in range(n):
        entries = [int(t) for t in tokens[4 + j] if int(t) != 0]
        if len(entries) != col_deg[j]:
            raise ValueError(f"column {j + 1}: degree {col_deg[j]} but {len(entries)} entries")
        c_idx += [j] * len(entries)
        r_idx += [e - 1 for e in entries]
    # the row section must agree with the column section
    check = set()
    for i in range(m):
        entries = [int(t) for t in tokens[4 + n + i] if int(t) != 0]
        if len(entries) != row_deg[i]:
            raise ValueError(f"row {i + 1}: degree {row_deg[i]} but {len(entries)} entries")
        check.update((i, e - 1) for e in entries)
    if check != set(zip(r_idx, c_idx)):
        raise ValueError("alist row and column sections disagree")
    return Gf2Matrix(m, n, np.array(r_idx, dtype=np.int64), np.array(c_idx, dtype=np.int64))
