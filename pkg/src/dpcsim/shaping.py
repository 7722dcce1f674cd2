"""Rate-1/2 shaping convolutional code and the Viterbi sign-bit shaper.

A code block of ``s`` sign bits spans ``s/2`` trellis steps. Bits are
interleaved per step as ``(y1[t], y2[t])`` for generators ``(g1, g2)``.
The syndrome former is the transfer ``(g2, g1)``, so

    syndrome[t] = (g2 * y1)[t] + (g1 * y2)[t]

truncated causally to ``s/2`` outputs. Truncated codewords started in the
zero state have zero syndrome, and the cosets of the code are exactly the
fibres of this map.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np

from .gf2 import as_bits
from .modulation import PamMapping, mod_fold

# (D^8+D^5+D^4+D^2+D+1, D^8+D^7+D^4+D^2+1), octal MSB-first
PAPER_GENERATORS = ("467", "625")


def _poly_from_spec(spec) -> int:
    """Polynomial as an int with bit j = coefficient of D^j.

    Accepts an int (taken as already in that form), an octal string, a binary
    coefficient string prefixed ``0b`` (MSB-first), or a coefficient sequence
    ``[c0, c1, ...]`` in ascending powers.
    """
    if isinstance(spec, (int, np.integer)):
        return int(spec)
    if isinstance(spec, str):
        text = spec.strip().lower()
        if text.startswith("0b"):
            return int(text[2:], 2)
        if text.startswith("0o"):
            text = text[2:]
        return int(text, 8)
    coeffs = [int(c) for c in spec]
    return sum(c << j for j, c in enumerate(coeffs))


def _pmul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _pdivmod(a: int, b: int) -> tuple[int, int]:
    q = 0
    db = b.bit_length()
    while a.bit_length() >= db:
        shift = a.bit_length() - db
        q ^= 1 << shift
        a ^= b << shift
    return q, a


def _bezout(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with x*a + y*b = g = gcd(a, b) over GF(2)[D]."""
    r0, r1 = a, b
    x0, x1, y0, y1 = 1, 0, 0, 1
    while r1:
        q, r = _pdivmod(r0, r1)
        r0, r1 = r1, r
        x0, x1 = x1, x0 ^ _pmul(q, x1)
        y0, y1 = y1, y0 ^ _pmul(q, y1)
    return r0, x0, y0


def _coeffs(p: int, length: int) -> np.ndarray:
    return np.array([(p >> j) & 1 for j in range(length)], dtype=np.uint8)


def _causal_conv(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """GF(2) convolution of ``x`` with ``taps`` truncated to ``len(x)``."""
    full = np.convolve(x.astype(np.int64), taps.astype(np.int64))[: x.size]
    return (full & 1).astype(np.uint8)


@dataclass(frozen=True)
class ConvCode:
    """Feed-forward rate-1/2 convolutional code ``(g1, g2)``."""

    g1: int
    g2: int

    def __post_init__(self):
        for g in (self.g1, self.g2):
            if g <= 0 or not g & 1:
                raise ValueError("generators need a nonzero constant term")
        if max(self.g1, self.g2).bit_length() - 1 <= 0:
            raise ValueError("code must have memory of at least one")

    @classmethod
    def from_spec(cls, g1, g2) -> ConvCode:
        return cls(_poly_from_spec(g1), _poly_from_spec(g2))

    @classmethod
    def paper(cls) -> ConvCode:
        return cls.from_spec(*PAPER_GENERATORS)

    @property
    def memory(self) -> int:
        return max(self.g1, self.g2).bit_length() - 1

    @property
    def num_states(self) -> int:
        return 1 << self.memory

    rate_num = 1
    rate_den = 2

    def taps(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.memory + 1
        return _coeffs(self.g1, m), _coeffs(self.g2, m)

    @cached_property
    def inverse_taps(self) -> tuple[np.ndarray, np.ndarray]:
        """Polynomials ``(a, b)`` with ``a*g2 + b*g1 = 1``."""
        g, a, b = _bezout(self.g2, self.g1)
        if g != 1:
            raise ValueError("generators share a factor; no feed-forward inverse syndrome former")
        width = max(a.bit_length(), b.bit_length(), 1)
        return _coeffs(a, width), _coeffs(b, width)

    @cached_property
    def trellis(self) -> ShapingTrellis:
        return ShapingTrellis.build(self)


@dataclass(frozen=True, eq=False)
class ShapingTrellis:
    """State graph: state bit ``j-1`` holds the input from ``j`` steps back."""

    num_states: int
    next_state: np.ndarray  # (states, 2)
    outputs: np.ndarray  # (states, 2) -> 2-bit value y1*2 + y2

    @classmethod
    def build(cls, code: ConvCode) -> ShapingTrellis:
        ns = code.num_states
        nxt = np.zeros((ns, 2), dtype=np.int64)
        out = np.zeros((ns, 2), dtype=np.int64)
        for st in range(ns):
            for bit in (0, 1):
                reg = (st << 1) | bit
                y1 = bin(reg & code.g1).count("1") & 1
                y2 = bin(reg & code.g2).count("1") & 1
                nxt[st, bit] = reg & (ns - 1)
                out[st, bit] = (y1 << 1) | y2
        return cls(ns, nxt, out)


def _split(code: ConvCode, z) -> tuple[np.ndarray, np.ndarray]:
    z = as_bits(z)
    if z.size % code.rate_den:
        raise ValueError(f"length {z.size} is not a multiple of {code.rate_den}")
    return z[0::2], z[1::2]


def conv_encode(code: ConvCode, bits) -> np.ndarray:
    """Encode from the zero state without termination; output is ``2 * len(bits)``."""
    u = as_bits(bits)
    t1, t2 = code.taps()
    out = np.empty(2 * u.size, dtype=np.uint8)
    out[0::2] = _causal_conv(u, t1)
    out[1::2] = _causal_conv(u, t2)
    return out


def syndrome_former(code: ConvCode, z) -> np.ndarray:
    """Coset index of ``z``: ``len(z)/2`` syndrome bits."""
    y1, y2 = _split(code, z)
    t1, t2 = code.taps()
    return _causal_conv(y1, t2) ^ _causal_conv(y2, t1)


def inverse_syndrome_former(code: ConvCode, syndrome) -> np.ndarray:
    """A coset representative with the given syndrome.

    Uses the polynomial right inverse ``(a, b)``, ``a*g2 + b*g1 = 1``: the
    representative is ``(a*m, b*m)`` interleaved. The map is linear and free of
    feedback, so each output bit depends on a bounded window of ``m``.
    """
    m = as_bits(syndrome)
    a, b = code.inverse_taps
    out = np.empty(2 * m.size, dtype=np.uint8)
    out[0::2] = _causal_conv(m, a)
    out[1::2] = _causal_conv(m, b)
    return out


@dataclass(frozen=True, eq=False)
class CosetSpec:
    """A coset ``t + C`` of the shaping code, ``t`` the inverse-syndrome leader."""

    code: ConvCode
    coset_leader: np.ndarray

    @classmethod
    def from_syndrome(cls, code: ConvCode, syndrome) -> CosetSpec:
        return cls(code, inverse_syndrome_former(code, syndrome))

    @property
    def length(self) -> int:
        return int(self.coset_leader.size)

    def contains(self, z) -> bool:
        return bool(
            np.array_equal(syndrome_former(self.code, z), syndrome_former(self.code, self.coset_leader))
        )


# ---------------------------------------------------------------------------
# Viterbi shaping
# ---------------------------------------------------------------------------

def symbol_costs(mapping: PamMapping, lower_bits, interference, alpha: float) -> np.ndarray:
    """``(s, 2)`` folded energies of each symbol with sign bit 0 and 1."""
    lower = np.asarray(lower_bits)
    s = lower.shape[0]
    target = alpha * np.asarray(interference, dtype=np.float64)
    if target.shape != (s,):
        raise ValueError("interference length must equal the number of symbols")
    half = mapping.M // 2
    weights = 1 << np.arange(mapping.l - 2, -1, -1)
    low = lower.astype(np.int64) @ weights
    costs = np.empty((s, 2))
    for zbit in (0, 1):
        v = mapping.label_table[(zbit * half) | low]
        costs[:, zbit] = mod_fold(v - target, mapping.M) ** 2
    return costs


@numba.njit(cache=True, nogil=True)
def _viterbi(costs, leader, next_state, outputs):
    steps = leader.size // 2
    ns = next_state.shape[0]
    inf = np.inf
    metric = np.full(ns, inf)
    metric[0] = 0.0
    new = np.empty(ns)
    # survivor predecessor per (step, state)
    back = np.empty((steps, ns), dtype=np.int32)
    bit_in = np.empty((steps, ns), dtype=np.uint8)
    for t in range(steps):
        c0 = costs[2 * t]
        c1 = costs[2 * t + 1]
        l0 = leader[2 * t]
        l1 = leader[2 * t + 1]
        new[:] = inf
        for st in range(ns):
            base = metric[st]
            if base == inf:
                continue
            for bit in range(2):
                nx = next_state[st, bit]
                o = outputs[st, bit]
                z0 = ((o >> 1) & 1) ^ l0
                z1 = (o & 1) ^ l1
                cand = base + c0[z0] + c1[z1]
                # strict comparison keeps the lower-index predecessor on ties
                if cand < new[nx]:
                    new[nx] = cand
                    back[t, nx] = st
                    bit_in[t, nx] = bit
        metric[:] = new
    best = 0
    for st in range(1, ns):
        if metric[st] < metric[best]:
            best = st
    u = np.empty(steps, dtype=np.uint8)
    st = best
    for t in range(steps - 1, -1, -1):
        u[t] = bit_in[t, st]
        st = back[t, st]
    return u, metric[best]


def shape(spec: CosetSpec, lower_bits, interference, alpha: float, mapping: PamMapping) -> np.ndarray:
    """Sign bits from the coset minimizing the folded energy of ``v - alpha*S``.

    ``lower_bits`` is ``(s, l-1)``; row ``i`` holds the lower label bits of
    symbol ``i``. Returns ``z`` of length ``s`` with ``z`` in the coset.
    """
    lower = np.asarray(lower_bits)
    s = spec.length
    if lower.shape != (s, mapping.l - 1):
        raise ValueError(f"lower bits must have shape ({s}, {mapping.l - 1})")
    costs = symbol_costs(mapping, lower, interference, alpha)
    tr = spec.code.trellis
    u, _ = _viterbi(costs, spec.coset_leader.astype(np.int64), tr.next_state, tr.outputs)
    return spec.coset_leader ^ conv_encode(spec.code, u)


def folded_energy(mapping: PamMapping, z, lower_bits, interference, alpha: float) -> float:
    costs = symbol_costs(mapping, lower_bits, interference, alpha)
    z = as_bits(z)
    return float(costs[np.arange(z.size), z].sum())
