"""M-PAM constellation with a sign-bit shaping labeling, modulo folding and LLR demapping.

Labels are ``l = log2(M)`` bits ``(z, b2, ..., bl)``. The first bit ``z`` picks
the region: ``z = 0`` selects the ``M/2`` inner points, ``z = 1`` the outer ones.
The lower bits are Gray coded within the region, and flipping ``z`` moves a
point by exactly ``M/2`` modulo ``M``.

LLRs follow ``log P(bit = 0) / P(bit = 1)`` throughout.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np

MAX_REPLICATION = 4


def mod_fold(x, m: float):
    """Fold ``x`` into ``[-m/2, m/2)`` modulo ``m``.

    Works elementwise on arrays; non-finite input raises ``ValueError``.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("mod_fold needs finite input")
    out = arr - m * np.floor((arr + m / 2) / m)
    # rounding in the subtraction can land exactly on the excluded edge
    out = np.where(out >= m / 2, out - m, out)
    out = np.where(out < -m / 2, out + m, out)
    return float(out) if out.ndim == 0 else out


def gray_decode(g: int) -> int:
    u = g
    shift = g >> 1
    while shift:
        u ^= shift
        shift >>= 1
    return u


def _int_to_bits(v: int, width: int) -> list[int]:
    return [(v >> (width - 1 - i)) & 1 for i in range(width)]


@dataclass(frozen=True)
class PamMapping:
    """The labeled ``M``-PAM alphabet ``{-(M-1)/2, ..., (M-1)/2}``."""

    M: int = 16

    def __post_init__(self):
        if self.M < 4 or self.M & (self.M - 1):
            raise ValueError("M must be a power of two, at least 4")

    @property
    def l(self) -> int:  # noqa: E743
        return self.M.bit_length() - 1

    @cached_property
    def symbols(self) -> np.ndarray:
        """Alphabet in increasing order."""
        return np.arange(self.M, dtype=np.float64) - (self.M - 1) / 2

    @cached_property
    def label_table(self) -> np.ndarray:
        """``label_table[label]`` is the symbol for the integer label (MSB = sign bit)."""
        half = self.M // 2
        table = np.empty(self.M)
        for label in range(self.M):
            z, lower = label >> (self.l - 1), label & (half - 1)
            u = gray_decode(lower)
            table[label] = mod_fold(u - (half - 1) / 2 + z * half, self.M)
        return table

    @cached_property
    def symbol_labels(self) -> np.ndarray:
        """Integer label of each symbol in :attr:`symbols` order."""
        idx = np.rint(self.label_table + (self.M - 1) / 2).astype(np.int64)
        out = np.empty(self.M, dtype=np.int64)
        out[idx] = np.arange(self.M)
        return out

    @cached_property
    def label_bits(self) -> np.ndarray:
        """``(M, l)`` bit matrix of the label of each symbol in :attr:`symbols` order."""
        return np.array([_int_to_bits(int(v), self.l) for v in self.symbol_labels], dtype=np.uint8)

    @property
    def average_power(self) -> float:
        return (self.M**2 - 1) / 12

    def label_of(self, bits) -> int:
        v = 0
        for b in bits:
            v = (v << 1) | int(b)
        return v

    def symbol_of(self, bits) -> float:
        return float(self.label_table[self.label_of(bits)])

    def bits_of(self, symbol: float) -> np.ndarray:
        idx = int(round(symbol + (self.M - 1) / 2))
        if not 0 <= idx < self.M or abs(self.symbols[idx] - symbol) > 1e-9:
            raise ValueError(f"{symbol} is not a constellation point")
        return self.label_bits[idx].copy()

    def gray_violations(self) -> int:
        """Adjacent symbol pairs whose labels differ in more than one bit."""
        bits = self.label_bits
        return int(np.sum(np.sum(bits[1:] != bits[:-1], axis=1) > 1))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "symbol"])
            for sym, bits in zip(self.symbols, self.label_bits):
                writer.writerow(["".join(map(str, bits)), f"{sym:g}"])


def map_symbols(mapping: PamMapping, z, lower_bits) -> np.ndarray:
    """Map sign bits ``z`` (s,) and lower bits (s, l-1) to PAM symbols."""
    z = np.asarray(z, dtype=np.int64)
    lower = np.asarray(lower_bits, dtype=np.int64).reshape(z.size, mapping.l - 1)
    weights = 1 << np.arange(mapping.l - 2, -1, -1)
    labels = (z << (mapping.l - 1)) | (lower @ weights)
    return mapping.label_table[labels]


# ---------------------------------------------------------------------------
# demapping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplicatedConstellation:
    """Periodic extension ``{a + jM : a in A, |j| <= r}`` with labels repeated."""

    base: PamMapping
    r: int = 0
    points: np.ndarray = field(init=False, repr=False)
    bits: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("replication count must be non-negative")
        shifts = np.arange(-self.r, self.r + 1) * self.base.M
        pts = (self.base.symbols[None, :] + shifts[:, None]).ravel()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "bits", np.tile(self.base.label_bits, (2 * self.r + 1, 1)))

    def mean_square(self) -> float:
        return float(np.mean(self.points**2))


def choose_replication(base: PamMapping, total_power: float) -> int:
    """Smallest ``r`` whose replicated set reaches ``total_power`` (capped at 4)."""
    for r in range(MAX_REPLICATION + 1):
        # cross terms vanish because the base alphabet has zero mean
        if base.average_power + base.M**2 * r * (r + 1) / 3 >= total_power:
            return r
    return MAX_REPLICATION


@numba.njit(cache=True, nogil=True)
def _demap(y, points, bits, log_prior, inv_two_var):
    n = y.size
    npts, nbits = bits.shape
    out = np.empty((n, nbits))
    metric = np.empty(npts)
    for i in range(n):
        for p in range(npts):
            d = y[i] - points[p]
            metric[p] = log_prior[p] - d * d * inv_two_var
        for b in range(nbits):
            m0 = -np.inf
            m1 = -np.inf
            for p in range(npts):
                if bits[p, b]:
                    if metric[p] > m1:
                        m1 = metric[p]
                elif metric[p] > m0:
                    m0 = metric[p]
            s0 = 0.0
            s1 = 0.0
            for p in range(npts):
                if bits[p, b]:
                    if m1 > -np.inf:
                        s1 += np.exp(metric[p] - m1)
                elif m0 > -np.inf:
                    s0 += np.exp(metric[p] - m0)
            l0 = m0 + np.log(s0) if m0 > -np.inf else -np.inf
            l1 = m1 + np.log(s1) if m1 > -np.inf else -np.inf
            out[i, b] = l0 - l1
    return out


def _check_noise_var(noise_var: float) -> None:
    if not noise_var > 0 or not math.isfinite(noise_var):
        raise ValueError("noise variance must be positive and finite")


def demap_llr(rc: ReplicatedConstellation, y_hat, noise_var: float) -> np.ndarray:
    """Bit LLRs of received values against the replicated constellation.

    Scalar input gives an ``(l,)`` vector, array input an ``(n, l)`` matrix.
    """
    _check_noise_var(noise_var)
    y = np.atleast_1d(np.asarray(y_hat, dtype=np.float64))
    if not np.all(np.isfinite(y)):
        raise ValueError("received values must be finite")
    out = _demap(y, rc.points, rc.bits, np.zeros(rc.points.size), 0.5 / noise_var)
    return out[0] if np.ndim(y_hat) == 0 else out


def gaussian_prior(mapping: PamMapping, variance: float) -> np.ndarray:
    """Discretized zero-mean Gaussian over the alphabet, renormalized."""
    if not variance > 0:
        raise ValueError("prior variance must be positive")
    w = np.exp(-mapping.symbols**2 / (2 * variance))
    return w / w.sum()


def demap_llr_with_prior(mapping: PamMapping, y, noise_var: float, prior) -> np.ndarray:
    """Bit LLRs over the base alphabet with per-symbol prior probabilities.

    ``prior`` is indexed like ``mapping.symbols``. Zero entries are allowed
    only in the sense of a degenerate prior; LLRs then saturate to +-inf.
    """
    _check_noise_var(noise_var)
    prior = np.asarray(prior, dtype=np.float64)
    if prior.shape != (mapping.M,) or np.any(prior < 0) or abs(prior.sum() - 1) > 1e-9:
        raise ValueError("prior must be M non-negative probabilities summing to 1")
    yy = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if not np.all(np.isfinite(yy)):
        raise ValueError("received values must be finite")
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior)
    out = _demap(yy, mapping.symbols, mapping.label_bits, log_prior, 0.5 / noise_var)
    return out[0] if np.ndim(y) == 0 else out
