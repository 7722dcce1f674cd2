"""Block encoder and decoder with the one-codeword parity delay.

Block ``T`` carries ``z_T`` (sign bits), the ``k - k'`` uncoded-by-shaping
message bits of ``T`` and the LDPC parity of block ``T - 1``. The receiver
therefore decodes codeword ``T - 1`` once block ``T`` has arrived.

Lower-bit planes are packed plane by plane: interleaved bits ``0 .. s-1``
form ``a_2``, the next ``s`` form ``a_3``, and so on.
"""
from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channels import mmse_alpha
from .gf2 import as_bits, bits_to_hex, hex_to_bits
from .ldpc import (
    PAPER_CHK_DIST,
    PAPER_VAR_DIST,
    LdpcCode,
    bp_decode,
    construct,
    encode_systematic,
)
from .modulation import (
    PamMapping,
    ReplicatedConstellation,
    choose_replication,
    demap_llr,
    map_symbols,
    mod_fold,
)
from .shaping import ConvCode, CosetSpec, inverse_syndrome_former, shape, syndrome_former

LLR_CLAMP = 30.0
MIN_NOISE_VAR = 1e-6


@dataclass(frozen=True)
class DpcSystemParams:
    """Block sizes and powers of one DPC link (unit-spaced constellation)."""

    n: int = 40000
    k: int = 30000
    k_prime: int = 5000
    M: int = 16
    P_X: float = 7.93
    P_S: float = 0.0
    P_N: float = 0.0
    dither: bool = False

    def __post_init__(self):
        l = self.l
        if self.M < 4 or self.M & (self.M - 1):
            raise ValueError("M must be a power of two, at least 4")
        if self.n % l:
            raise ValueError(f"n = {self.n} is not a multiple of log2(M) = {l}")
        if self.s % 2:
            raise ValueError("the rate-1/2 shaping code needs an even number of symbols")
        if not 0 < self.k_prime < self.k:
            raise ValueError("need 0 < k' < k")
        if self.k_prime != self.s // 2:
            raise ValueError(f"k' must equal s/2 = {self.s // 2} for the rate-1/2 shaping code")
        if not self.ldpc_K < self.n:
            raise ValueError("k - k' + s must be below n")
        if self.k - self.k_prime > self.n - self.s:
            raise ValueError("message bits do not fit the lower bit planes")
        if self.P_X <= 0 or self.P_S < 0 or self.P_N < 0:
            raise ValueError("powers must be non-negative (P_X positive)")

    @property
    def l(self) -> int:  # noqa: E743
        return self.M.bit_length() - 1

    @property
    def s(self) -> int:
        return self.n // self.l

    @property
    def ldpc_K(self) -> int:
        return self.k - self.k_prime + self.s

    @property
    def parity_len(self) -> int:
        return self.n - self.ldpc_K

    @property
    def alpha(self) -> float:
        return mmse_alpha(self.P_X, self.P_N)

    @property
    def rate(self) -> float:
        """Information bits per channel use."""
        return self.k / self.s

    @property
    def c_star(self) -> float:
        """Bits per symbol entering the mapper before channel coding."""
        return self.l - self.k_prime / self.s

    @property
    def folds(self) -> bool:
        """Whether the transmitter's modulo can actually wrap symbols."""
        return self.P_S > 0 or self.dither

    def replication(self, mapping: PamMapping) -> int:
        r = choose_replication(mapping, self.P_X + self.P_S)
        return max(r, 1) if self.folds else r

    def scaled(self, n: int) -> DpcSystemParams:
        """Same rates at block length ``n``."""
        f = n / self.n
        return replace(self, n=n, k=round(self.k * f), k_prime=round(self.k_prime * f))

    def with_snr(self, snr_db: float) -> DpcSystemParams:
        return replace(self, P_N=self.P_X / 10 ** (snr_db / 10))


class Interleaver:
    """Seeded permutation of the ``n - s`` lower-plane bits."""

    def __init__(self, size: int, seed: int = 0):
        self.size = size
        self.seed = seed
        self.perm = np.random.default_rng(seed).permutation(size)

    def interleave(self, x):
        x = np.asarray(x)
        if x.shape[0] != self.size:
            raise ValueError("interleaver length mismatch")
        return x[self.perm]

    def deinterleave(self, y):
        y = np.asarray(y)
        if y.shape[0] != self.size:
            raise ValueError("interleaver length mismatch")
        out = np.empty_like(y)
        out[self.perm] = y
        return out


@dataclass(frozen=True, eq=False)
class DpcCodes:
    """Everything both ends share: shaping code, LDPC code, mapping, interleaver."""

    conv: ConvCode
    ldpc: LdpcCode
    mapping: PamMapping
    interleaver: Interleaver
    max_iter: int = 50
    min_sum: bool = False

    @classmethod
    def build(cls, params: DpcSystemParams, ldpc_seed: int = 1, interleaver_seed: int = 2,
              conv: ConvCode | None = None, var_dist=None, chk_dist=None, cache_dir=None,
              **kw) -> DpcCodes:
        ldpc = construct(params.n, params.ldpc_K, var_dist or PAPER_VAR_DIST,
                         chk_dist or PAPER_CHK_DIST, ldpc_seed, cache_dir=cache_dir)
        return cls(conv or ConvCode.paper(), ldpc, PamMapping(params.M),
                   Interleaver(params.n - params.s, interleaver_seed), **kw)


# ---------------------------------------------------------------------------
# encoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EncoderState:
    """Delay line of the encoder: parity of the previous codeword."""

    previous_parity: np.ndarray
    T: int = 0
    last_z: np.ndarray | None = None

    @classmethod
    def initial(cls, params: DpcSystemParams) -> EncoderState:
        return cls(np.zeros(params.parity_len, dtype=np.uint8))


def lower_planes(params: DpcSystemParams, codes: DpcCodes, msg_low, parity) -> np.ndarray:
    """``(s, l-1)`` lower label bits from message bits and delayed parity."""
    stream = codes.interleaver.interleave(np.concatenate([msg_low, parity]))
    return stream.reshape(params.l - 1, params.s).T


def encode_block(params: DpcSystemParams, state: EncoderState, m, S, codes: DpcCodes,
                 dither=None) -> tuple[np.ndarray, EncoderState]:
    """Encode one ``k``-bit message against known interference ``S``.

    Returns the transmitted block ``X`` (``s`` symbols in ``[-M/2, M/2)``) and
    the next encoder state, which carries this block's parity.
    """
    m = as_bits(m)
    S = np.asarray(S, dtype=np.float64)
    if m.size != params.k:
        raise ValueError(f"message must have {params.k} bits")
    if S.shape != (params.s,):
        raise ValueError(f"interference must have {params.s} samples")
    m_shape, m_low = m[: params.k_prime], m[params.k_prime:]
    lower = lower_planes(params, codes, m_low, state.previous_parity)
    coset = CosetSpec(codes.conv, inverse_syndrome_former(codes.conv, m_shape))
    alpha = params.alpha
    z = shape(coset, lower, S, alpha, codes.mapping)
    _, parity = encode_systematic(codes.ldpc, np.concatenate([z, m_low]))
    v = map_symbols(codes.mapping, z, lower)
    offset = alpha * S if dither is None else alpha * S + dither
    x = mod_fold(v - offset, params.M)
    return x, EncoderState(parity, state.T + 1, z)


# ---------------------------------------------------------------------------
# decoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecoderState:
    """Delayed sign-bit and message LLRs of the previous block."""

    sign_llr: np.ndarray | None = None
    msg_llr: np.ndarray | None = None
    T: int = 0
    converged: bool | None = None
    iterations: int = 0


def demap_block(params: DpcSystemParams, codes: DpcCodes, y_hat, noise_var: float,
                fold: bool, r: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split demapped LLRs into (sign, message, parity) parts."""
    if fold:
        y_hat = mod_fold(y_hat, params.M)
    rc = ReplicatedConstellation(codes.mapping, r)
    llr = demap_llr(rc, np.asarray(y_hat), max(noise_var, MIN_NOISE_VAR))
    return split_llrs(params, codes, llr)


def split_llrs(params, codes, llr):
    sign = llr[:, 0]
    stream = llr[:, 1:].T.reshape(-1)
    lower = codes.interleaver.deinterleave(stream)
    n_msg = params.k - params.k_prime
    return sign, lower[:n_msg], lower[n_msg:]


def ldpc_stage(params: DpcSystemParams, codes: DpcCodes, state: DecoderState,
               sign_llr, msg_llr, parity_llr) -> tuple[np.ndarray | None, DecoderState]:
    """Decode the delayed codeword once its parity has arrived."""
    if state.sign_llr is None:
        return None, DecoderState(sign_llr, msg_llr, state.T + 1)
    llr_in = np.clip(np.concatenate([state.sign_llr, state.msg_llr, parity_llr]),
                     -LLR_CLAMP, LLR_CLAMP)
    hard, ok, iters = bp_decode(codes.ldpc, llr_in, codes.max_iter, min_sum=codes.min_sum)
    z_hat = hard[: params.s]
    low_hat = hard[params.s: params.ldpc_K]
    m_hat = np.concatenate([syndrome_former(codes.conv, z_hat), low_hat])
    return m_hat, DecoderState(sign_llr, msg_llr, state.T + 1, ok, iters)


def decode_block(params: DpcSystemParams, state: DecoderState, Y, codes: DpcCodes,
                 dither=None) -> tuple[np.ndarray | None, DecoderState]:
    """Process received block ``T``; return the message of block ``T - 1``.

    The first call only fills the delay line and returns ``None`` in place of
    a message.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (params.s,):
        raise ValueError(f"received block must have {params.s} samples")
    alpha = params.alpha
    y_hat = alpha * Y if dither is None else alpha * Y + dither
    parts = demap_block(params, codes, y_hat, alpha * params.P_N, params.folds,
                        params.replication(codes.mapping))
    return ldpc_stage(params, codes, state, *parts)


def one_shot_roundtrip(params: DpcSystemParams, codes: DpcCodes, messages, interference,
                       noise_seed: int, dither_seed: int | None = None):
    """Send ``B`` blocks through ``Y = X + S + N`` and decode the first ``B - 1``.

    Returns ``(decoded, bit_errors)``; ``decoded[i]`` estimates ``messages[i]``.
    """
    from .channels import DirtyPaperChannel, DitherSource

    messages = np.asarray(messages, dtype=np.uint8)
    interference = np.asarray(interference, dtype=np.float64)
    channel = DirtyPaperChannel(params.P_N, noise_seed)
    seed = 0 if dither_seed is None else dither_seed
    tx_dither = DitherSource(seed, params.M, params.dither)
    rx_dither = DitherSource(seed, params.M, params.dither)
    enc, dec = EncoderState.initial(params), DecoderState()
    decoded = []
    for m, S in zip(messages, interference):
        u_tx = tx_dither.draw(params.s) if params.dither else None
        x, enc = encode_block(params, enc, m, S, codes, u_tx)
        y = channel(x, S)
        u_rx = rx_dither.draw(params.s) if params.dither else None
        m_hat, dec = decode_block(params, dec, y, codes, u_rx)
        if m_hat is not None:
            decoded.append(m_hat)
    decoded = np.array(decoded, dtype=np.uint8).reshape(-1, params.k)
    errors = int(np.count_nonzero(decoded != messages[: len(decoded)]))
    return decoded, errors


def measure_transmit_power(params: DpcSystemParams, codes: DpcCodes, blocks: int,
                           seed: int) -> float:
    """Mean ``|X|^2`` of the shaper alone, with uniform message and parity bits."""
    rng = np.random.default_rng(seed)
    from .channels import InterferenceSource

    source = InterferenceSource(params.P_S, seed + 1)
    total = 0.0
    for _ in range(blocks):
        m_shape = rng.integers(0, 2, params.k_prime, dtype=np.uint8)
        lower = rng.integers(0, 2, (params.s, params.l - 1), dtype=np.uint8)
        S = source.draw(params.s)
        coset = CosetSpec(codes.conv, inverse_syndrome_former(codes.conv, m_shape))
        z = shape(coset, lower, S, params.alpha, codes.mapping)
        dither = rng.uniform(-params.M / 2, params.M / 2, params.s) if params.dither else 0.0
        x = mod_fold(map_symbols(codes.mapping, z, lower) - params.alpha * S - dither, params.M)
        total += float(np.mean(x**2))
    return total / blocks


# ---------------------------------------------------------------------------
# frame dumps
# ---------------------------------------------------------------------------

@dataclass
class FrameRecord:
    T: int
    m: np.ndarray
    z: np.ndarray
    parity: np.ndarray
    X: np.ndarray = field(repr=False)


class FrameWriter:
    """Conformance dump: one JSON header line, then little-endian records.

    Record layout: ``u64 T``; for each of m, z, parity a ``u32`` bit length, a
    ``u32`` byte length and the MSB-first hex string in ASCII; then ``u32``
    symbol count and that many ``f64`` values of ``X``.
    """

    def __init__(self, fh: io.BufferedIOBase, header: dict):
        self.fh = fh
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")

    def write(self, rec: FrameRecord) -> None:
        out = [struct.pack("<Q", rec.T)]
        for bits in (rec.m, rec.z, rec.parity):
            text = bits_to_hex(bits).encode()
            out.append(struct.pack("<II", len(bits), len(text)) + text)
        x = np.asarray(rec.X, dtype="<f8")
        out.append(struct.pack("<I", x.size) + x.tobytes())
        self.fh.write(b"".join(out))


def read_frames(fh) -> tuple[dict, list[FrameRecord]]:
    header = json.loads(fh.readline())
    records = []
    while True:
        head = fh.read(8)
        if not head:
            break
        (T,) = struct.unpack("<Q", head)
        vecs = []
        for _ in range(3):
            nbits, nbytes = struct.unpack("<II", fh.read(8))
            vecs.append(hex_to_bits(fh.read(nbytes).decode(), nbits))
        (count,) = struct.unpack("<I", fh.read(4))
        x = np.frombuffer(fh.read(8 * count), dtype="<f8").copy()
        records.append(FrameRecord(T, *vecs, x))
    return header, records


def params_header(params: DpcSystemParams, **seeds) -> dict:
    head = asdict(params)
    head.update(seeds)
    head["alpha"] = params.alpha
    if not math.isfinite(head["alpha"]):
        raise ValueError("invalid alpha")
    return head
