"""Irregular LDPC codes: random construction, systematic encoding, BP decoding.

Degree distributions are node-perspective: ``{3: 0.714}`` means 71.4% of the
variable nodes have degree 3.

An :class:`LdpcCode` works in *systematic order*: column ``j`` of
``code.H_sys`` is column ``perm[j]`` of the constructed matrix, and every
codeword in that order is ``[message | parity]``. The encoder and the decoder
both use this order, so callers never see the permutation.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numba
import numpy as np

from .gf2 import (
    Gf2Matrix,
    as_bits,
    gauss_jordan_packed,
    mat_vec_mul,
    pack_rows,
    pack_vector,
    packed_mat_vec,
    read_alist,
    unpack_rows,
    write_alist,
)

log = logging.getLogger(__name__)

GEN_MAGIC = b"DPCGEN01"

# variable profile 0.1256x + 0.7140x^2 + 0.1604x^9, check profile x^31
PAPER_VAR_DIST = {2: 0.1256, 3: 0.7140, 10: 0.1604}
PAPER_CHK_DIST = {32: 1.0}


class DegreeDistribution(dict):
    """Mapping degree -> fraction of nodes with that degree."""

    def __init__(self, pairs):
        super().__init__({int(d): float(f) for d, f in dict(pairs).items()})
        if not self:
            raise ValueError("empty degree distribution")
        if any(d < 1 for d in self):
            raise ValueError("degrees must be positive")
        if any(f < 0 for f in self.values()):
            raise ValueError("fractions must be non-negative")
        if abs(sum(self.values()) - 1) > 1e-9:
            raise ValueError(f"fractions sum to {sum(self.values())}, not 1")

    @property
    def mean(self) -> float:
        return sum(d * f for d, f in self.items())

    def node_counts(self, total: int) -> dict[int, int]:
        """Integer node counts summing to ``total`` (largest remainder rounding)."""
        degrees = sorted(self)
        raw = np.array([self[d] * total for d in degrees])
        counts = np.floor(raw).astype(int)
        short = total - counts.sum()
        for i in np.argsort(-(raw - counts), kind="stable")[:short]:
            counts[i] += 1
        return {d: int(c) for d, c in zip(degrees, counts)}


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _check_degrees(chk_dist: DegreeDistribution, m: int, edges: int, n: int) -> np.ndarray:
    counts = chk_dist.node_counts(m)
    degs = np.concatenate([np.full(c, d, dtype=np.int64) for d, c in counts.items()])
    diff = edges - int(degs.sum())
    if abs(diff) > m:
        raise ValueError(
            f"degree profiles do not balance: {edges} variable edges vs {degs.sum()} check sockets"
        )
    # spread the repair one socket per check, largest checks trimmed first
    order = np.argsort(-degs if diff < 0 else degs, kind="stable")
    degs[order[: abs(diff)]] += int(np.sign(diff))
    if degs.min() < 1 or degs.max() > n:
        raise ValueError("degree repair produced an impossible check degree")
    return degs


def _pair_sockets(var_deg, chk_deg, rng) -> tuple[np.ndarray, np.ndarray]:
    v_sock = np.repeat(np.arange(var_deg.size), var_deg)
    c_sock = rng.permutation(np.repeat(np.arange(chk_deg.size), chk_deg))
    return v_sock, c_sock


def _remove_duplicates(v_sock, c_sock, rng, max_passes=50) -> None:
    """Swap check sockets until no (var, check) pair repeats."""
    n_edges = v_sock.size
    for _ in range(max_passes):
        key = v_sock.astype(np.int64) * (c_sock.max() + 1) + c_sock
        _, first = np.unique(key, return_index=True)
        dup = np.setdiff1d(np.arange(n_edges), first)
        if dup.size == 0:
            return
        edges = set(zip(v_sock.tolist(), c_sock.tolist()))
        for e in dup:
            for _try in range(100):
                f = int(rng.integers(n_edges))
                a, b = (int(v_sock[e]), int(c_sock[f])), (int(v_sock[f]), int(c_sock[e]))
                if a not in edges and b not in edges and a != b:
                    edges.discard((int(v_sock[f]), int(c_sock[f])))
                    edges.add(a)
                    edges.add(b)
                    c_sock[e], c_sock[f] = c_sock[f], c_sock[e]
                    break
    raise RuntimeError("could not remove duplicate edges")


def _break_degree2_cycles(v_sock, c_sock, var_deg, rng, max_passes=20) -> None:
    """Avoid two degree-2 variables sharing both checks (a 4-cycle)."""
    deg2 = np.flatnonzero(var_deg == 2)
    if deg2.size < 2:
        return
    starts = np.concatenate([[0], np.cumsum(var_deg)[:-1]])
    for _ in range(max_passes):
        seen = {}
        bad = []
        for v in deg2:
            s = starts[v]
            pair = tuple(sorted((int(c_sock[s]), int(c_sock[s + 1]))))
            if pair in seen:
                bad.append(s)
            else:
                seen[pair] = v
        if not bad:
            return
        edges = set(zip(v_sock.tolist(), c_sock.tolist()))
        for e in bad:
            for _try in range(100):
                f = int(rng.integers(v_sock.size))
                a, b = (int(v_sock[e]), int(c_sock[f])), (int(v_sock[f]), int(c_sock[e]))
                if a in edges or b in edges or c_sock[f] == c_sock[e + 1]:
                    continue
                new_pair = tuple(sorted((int(c_sock[f]), int(c_sock[e + 1]))))
                if new_pair in seen:
                    continue
                edges.discard((int(v_sock[e]), int(c_sock[e])))
                edges.discard((int(v_sock[f]), int(c_sock[f])))
                edges.update((a, b))
                c_sock[e], c_sock[f] = c_sock[f], c_sock[e]
                seen[new_pair] = v_sock[e]
                break
    log.warning("some degree-2 4-cycles remain after %d passes", max_passes)


def _matrix_rank(h: Gf2Matrix) -> int:
    return gauss_jordan_packed(h.to_packed(), h.cols)[1]


def _repair_rank(h: Gf2Matrix, target: int, rng, max_moves=1000) -> Gf2Matrix:
    """Move single edges inside rows until the matrix reaches ``target`` rank."""
    rank = _matrix_rank(h)
    rows, cols = h.row_idx.copy(), h.col_idx.copy()
    moves = 0
    while rank < target:
        if moves >= max_moves:
            raise RuntimeError(f"rank repair stalled at {rank} < {target}")
        moves += 1
        e = int(rng.integers(rows.size))
        row_cols = set(cols[rows == rows[e]].tolist())
        w = int(rng.integers(h.cols))
        if w in row_cols:
            continue
        old = cols[e]
        cols[e] = w
        trial = Gf2Matrix(h.rows, h.cols, rows, cols)
        new_rank = _matrix_rank(trial)
        if new_rank > rank:
            rank, h = new_rank, trial
            rows, cols = h.row_idx.copy(), h.col_idx.copy()
        else:
            cols[e] = old
    if moves:
        log.info("rank repair used %d edge moves", moves)
    return h


def construct_parity_check(n, K, var_dist, chk_dist, seed) -> Gf2Matrix:
    """Random irregular ``(n-K) x n`` parity-check matrix of full row rank."""
    var_dist = DegreeDistribution(var_dist)
    chk_dist = DegreeDistribution(chk_dist)
    m = n - K
    if not 0 < K < n:
        raise ValueError("need 0 < K < n")
    rng = np.random.default_rng(seed)
    counts = var_dist.node_counts(n)
    var_deg = rng.permutation(np.concatenate([np.full(c, d, dtype=np.int64) for d, c in counts.items()]))
    if var_deg.max() > m:
        raise ValueError("variable degree exceeds the number of checks")
    chk_deg = _check_degrees(chk_dist, m, int(var_deg.sum()), n)
    v_sock, c_sock = _pair_sockets(var_deg, chk_deg, rng)
    _remove_duplicates(v_sock, c_sock, rng)
    _break_degree2_cycles(v_sock, c_sock, var_deg, rng)
    h = Gf2Matrix(m, n, c_sock, v_sock)
    return _repair_rank(h, m, rng)


# ---------------------------------------------------------------------------
# code object
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _gather_columns(packed, cols):
    rows = packed.shape[0]
    nw = (cols.size + 63) // 64
    out = np.zeros((rows, nw), dtype=np.uint64)
    for r in range(rows):
        for j in range(cols.size):
            c = cols[j]
            if (packed[r, c >> 6] >> np.uint64(c & 63)) & np.uint64(1):
                out[r, j >> 6] |= np.uint64(1) << np.uint64(j & 63)
    return out


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Parity-check matrix with its systematic encoder.

    ``H`` is the matrix as constructed, ``perm`` the systematic column order,
    ``H_sys = H[:, perm]`` and ``parity_rows`` the packed ``(n-K) x K`` matrix
    ``A`` with ``parity = A @ message``.
    """

    H: Gf2Matrix
    perm: np.ndarray
    parity_rows: np.ndarray

    @property
    def n(self) -> int:
        return self.H.cols

    @property
    def K(self) -> int:
        return self.H.cols - self.H.rows

    @cached_property
    def H_sys(self) -> Gf2Matrix:
        return self.H.permute_columns(self.perm)

    @property
    def rate(self) -> float:
        return self.K / self.n

    @cached_property
    def generator_dense_part(self) -> np.ndarray:
        """Dense ``K x (n-K)`` matrix ``P`` with codeword ``[msg | msg @ P]``."""
        return unpack_rows(self.parity_rows, self.K).T.copy()

    @cached_property
    def graph(self) -> TannerGraph:
        return TannerGraph.from_matrix(self.H_sys)

    @classmethod
    def from_parity_check(cls, h: Gf2Matrix) -> LdpcCode:
        """Derive the systematic encoder of a full-rank ``h``."""
        packed = h.to_packed()
        pivots, rank = gauss_jordan_packed(packed, h.cols)
        if rank != h.rows:
            raise ValueError(f"parity-check matrix has rank {rank} < {h.rows} rows")
        is_pivot = np.zeros(h.cols, dtype=bool)
        is_pivot[pivots] = True
        info = np.flatnonzero(~is_pivot)
        perm = np.concatenate([info, pivots]).astype(np.int64)
        # reduced row i has a 1 at pivots[i] and zeros on the other pivots
        a = _gather_columns(packed, info)
        return cls(h, perm, a)

    def syndrome(self, codeword) -> np.ndarray:
        return mat_vec_mul(self.H_sys, codeword)


def construct(n: int, K: int, var_dist, chk_dist, seed: int, cache_dir=None) -> LdpcCode:
    """Random irregular LDPC code with its systematic encoder.

    With ``cache_dir`` set, the code is stored there as ``<key>.alist`` plus
    ``<key>.gen`` and reloaded on later calls with the same arguments.
    """
    if cache_dir is not None:
        key = _cache_key(n, K, var_dist, chk_dist, seed)
        stem = Path(cache_dir) / key
        if stem.with_suffix(".alist").exists() and stem.with_suffix(".gen").exists():
            return load_code(stem)
    h = construct_parity_check(n, K, var_dist, chk_dist, seed)
    code = LdpcCode.from_parity_check(h)
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        save_code(code, stem)
    return code


def _cache_key(n, K, var_dist, chk_dist, seed) -> str:
    text = repr((n, K, sorted(dict(var_dist).items()), sorted(dict(chk_dist).items()), seed))
    return f"ldpc_{n}_{K}_" + hashlib.sha1(text.encode()).hexdigest()[:12]


def encode_systematic(code: LdpcCode, msg) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(codeword, parity)`` with ``codeword = [msg | parity]``."""
    msg = as_bits(msg)
    if msg.size != code.K:
        raise ValueError(f"message length {msg.size} != K = {code.K}")
    parity = packed_mat_vec(code.parity_rows, pack_vector(msg))
    return np.concatenate([msg, parity]), parity


# ---------------------------------------------------------------------------
# storage
# ---------------------------------------------------------------------------

def write_bit_matrix(dense_rows_packed: np.ndarray, cols: int, path) -> None:
    """Binary file: 8-byte magic, uint64 LE rows, uint64 LE cols, packed rows.

    Each row is packed MSB-first and padded to a whole byte.
    """
    dense = unpack_rows(dense_rows_packed, cols)
    body = np.packbits(dense, axis=1)
    with open(path, "wb") as fh:
        fh.write(GEN_MAGIC)
        fh.write(np.array([dense.shape[0], cols], dtype="<u8").tobytes())
        fh.write(body.tobytes())


def read_bit_matrix(path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if raw[:8] != GEN_MAGIC:
        raise ValueError("not a generator cache file")
    rows, cols = np.frombuffer(raw[8:24], dtype="<u8")
    rows, cols = int(rows), int(cols)
    body = np.frombuffer(raw[24:], dtype=np.uint8)
    width = (cols + 7) // 8
    if body.size != rows * width:
        raise ValueError("generator cache is truncated")
    dense = np.unpackbits(body.reshape(rows, width), axis=1)[:, :cols]
    return pack_rows(dense), cols


def save_code(code: LdpcCode, stem) -> None:
    """Store ``H_sys`` as alist and the parity matrix as a bit-matrix file."""
    stem = Path(stem)
    write_alist(code.H_sys, stem.with_suffix(".alist"))
    write_bit_matrix(code.parity_rows, code.K, stem.with_suffix(".gen"))


def load_code(stem) -> LdpcCode:
    stem = Path(stem)
    h = read_alist(stem.with_suffix(".alist"))
    parity, cols = read_bit_matrix(stem.with_suffix(".gen"))
    if parity.shape[0] != h.rows or cols != h.cols - h.rows:
        raise ValueError("generator cache does not match the parity-check matrix")
    code = LdpcCode(h, np.arange(h.cols, dtype=np.int64), parity)
    # several probes: a single one misses any corruption it happens to be orthogonal to
    probes = np.random.default_rng(0).integers(0, 2, (16, code.K), dtype=np.uint8)
    for probe in probes:
        if code.syndrome(encode_systematic(code, probe)[0]).any():
            raise ValueError("generator cache is inconsistent with the parity-check matrix")
    return code


# ---------------------------------------------------------------------------
# belief propagation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Edge arrays for flooding BP; edges are ordered by check."""

    n: int
    m: int
    chk_ptr: np.ndarray
    edge_var: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray

    @classmethod
    def from_matrix(cls, h: Gf2Matrix) -> TannerGraph:
        chk_ptr = np.searchsorted(h.row_idx, np.arange(h.rows + 1)).astype(np.int64)
        edge_var = h.col_idx.astype(np.int64)
        var_edges = np.argsort(edge_var, kind="stable").astype(np.int64)
        var_ptr = np.searchsorted(edge_var[var_edges], np.arange(h.cols + 1)).astype(np.int64)
        return cls(h.cols, h.rows, chk_ptr, edge_var, var_ptr, var_edges)


@numba.njit(cache=True, nogil=True)
def _syndrome_ok(hard, chk_ptr, edge_var):
    m = chk_ptr.size - 1
    for c in range(m):
        acc = 0
        for e in range(chk_ptr[c], chk_ptr[c + 1]):
            acc ^= hard[edge_var[e]]
        if acc:
            return False
    return True


@numba.njit(cache=True, nogil=True)
def _bp(llr, chk_ptr, edge_var, var_ptr, var_edges, max_iter, min_sum, scale):
    n = llr.size
    m = chk_ptr.size - 1
    n_edges = edge_var.size
    c2v = np.zeros(n_edges)
    v2c = np.empty(n_edges)
    total = llr.copy()
    hard = np.empty(n, dtype=np.uint8)
    for j in range(n):
        hard[j] = 1 if total[j] < 0 else 0
    if _syndrome_ok(hard, chk_ptr, edge_var):
        return hard, total, True, 0
    fwd = np.empty(64)
    it = 0
    while it < max_iter:
        it += 1
        for e in range(n_edges):
            v2c[e] = total[edge_var[e]] - c2v[e]
        for c in range(m):
            lo = chk_ptr[c]
            deg = chk_ptr[c + 1] - lo
            if min_sum:
                min1 = np.inf
                min2 = np.inf
                arg = -1
                sign = 1.0
                for k in range(deg):
                    x = v2c[lo + k]
                    if x < 0:
                        sign = -sign
                    a = abs(x)
                    if a < min1:
                        min2 = min1
                        min1 = a
                        arg = k
                    elif a < min2:
                        min2 = a
                for k in range(deg):
                    x = v2c[lo + k]
                    mag = min2 if k == arg else min1
                    sgn = -sign if x < 0 else sign
                    c2v[lo + k] = scale * sgn * mag
            else:
                if deg > fwd.size:
                    fwd = np.empty(2 * deg)
                # exclusive products via a forward pass and a running backward product
                acc = 1.0
                for k in range(deg):
                    fwd[k] = acc
                    acc *= math.tanh(0.5 * v2c[lo + k])
                acc = 1.0
                for k in range(deg - 1, -1, -1):
                    p = fwd[k] * acc
                    if p > 0.999999999999:
                        p = 0.999999999999
                    elif p < -0.999999999999:
                        p = -0.999999999999
                    c2v[lo + k] = 2.0 * math.atanh(p)
                    acc *= math.tanh(0.5 * v2c[lo + k])
        for j in range(n):
            t = llr[j]
            for q in range(var_ptr[j], var_ptr[j + 1]):
                t += c2v[var_edges[q]]
            total[j] = t
            hard[j] = 1 if t < 0 else 0
        if _syndrome_ok(hard, chk_ptr, edge_var):
            return hard, total, True, it
    return hard, total, False, it


def bp_decode(code: LdpcCode, llr_in, max_iter: int = 50, min_sum: bool = False,
              min_sum_scale: float = 0.75, return_llr: bool = False):
    """Flooding belief propagation on ``code.H_sys``.

    ``llr_in`` follows log P(0)/P(1). Returns ``(hard_bits, converged,
    iterations)``, plus the posterior LLRs when ``return_llr`` is set.
    Iteration 0 is the check on the channel hard decisions.
    """
    llr = np.ascontiguousarray(llr_in, dtype=np.float64)
    if llr.shape != (code.n,):
        raise ValueError(f"expected {code.n} LLRs, got {llr.shape}")
    if not np.all(np.isfinite(llr)):
        raise ValueError("LLR input must be finite")
    g = code.graph
    hard, post, ok, it = _bp(llr, g.chk_ptr, g.edge_var, g.var_ptr, g.var_edges,
                             int(max_iter), bool(min_sum), float(min_sum_scale))
    if return_llr:
        return hard, bool(ok), int(it), post
    return hard, bool(ok), int(it)
