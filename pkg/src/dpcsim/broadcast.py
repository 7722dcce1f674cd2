"""Two-user superposition coding over the degraded Gaussian broadcast channel.

User 1 is shaped and LDPC coded with no interference; User 2 is dirty-paper
coded against User 1's signal. Both streams run the unit-spaced pipeline and
are scaled to their power share: ``X = c1 * x1 + c2 * x2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channels import awgn_capacity, bc_capacity_region, outside_time_sharing
from .modulation import PamMapping, demap_llr_with_prior, gaussian_prior
from .pipeline import (
    DecoderState,
    DpcCodes,
    DpcSystemParams,
    EncoderState,
    MIN_NOISE_VAR,
    decode_block,
    encode_block,
    ldpc_stage,
    split_llrs,
)

PRIOR_MODES = ("own", "interferer", "uniform")


@dataclass(frozen=True)
class BcConfig:
    """Power split and noise levels; ``unit_power`` is the shaped power of a unit-spaced stream."""

    base: DpcSystemParams
    beta: float
    P: float
    P_N1: float
    P_N2: float
    unit_power1: float = 7.93
    unit_power2: float = 7.93
    prior: str = "own"

    def __post_init__(self):
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")
        if not self.P_N1 > self.P_N2 > 0:
            raise ValueError("need P_N1 > P_N2 > 0")
        if self.P <= 0:
            raise ValueError("total power must be positive")
        if self.prior not in PRIOR_MODES:
            raise ValueError(f"prior must be one of {PRIOR_MODES}")

    @classmethod
    def from_powers(cls, base, p_x1, p_x2, p_n1, p_n2, **kw) -> BcConfig:
        total = p_x1 + p_x2
        return cls(base, p_x2 / total, total, p_n1, p_n2, **kw)

    @property
    def P_X1(self) -> float:
        return (1 - self.beta) * self.P

    @property
    def P_X2(self) -> float:
        return self.beta * self.P

    @property
    def scale1(self) -> float:
        return math.sqrt(self.P_X1 / self.unit_power1)

    @property
    def scale2(self) -> float:
        return math.sqrt(self.P_X2 / self.unit_power2)

    @property
    def user2_enabled(self) -> bool:
        return self.beta > 0

    @property
    def user1_enabled(self) -> bool:
        return self.beta < 1

    def user1_params(self) -> DpcSystemParams:
        c = self.scale1
        return replace(self.base, P_X=self.unit_power1, P_S=0.0,
                       P_N=(self.P_X2 + self.P_N1) / c**2, dither=False)

    def user2_params(self) -> DpcSystemParams:
        c = self.scale2
        return replace(self.base, P_X=self.unit_power2, P_S=self.P_X1 / c**2,
                       P_N=self.P_N2 / c**2)

    def snr1_db(self, p_x1=None, p_x2=None) -> float:
        p_x1 = self.P_X1 if p_x1 is None else p_x1
        p_x2 = self.P_X2 if p_x2 is None else p_x2
        return 10 * math.log10(p_x1 / (p_x2 + self.P_N1))

    def snr2_db(self, p_x2=None) -> float:
        p_x2 = self.P_X2 if p_x2 is None else p_x2
        return 10 * math.log10(p_x2 / self.P_N2)

    def receiver1_prior(self) -> np.ndarray:
        mapping = PamMapping(self.base.M)
        if self.prior == "uniform":
            return np.full(mapping.M, 1 / mapping.M)
        if self.prior == "own":
            return gaussian_prior(mapping, self.unit_power1)
        # User 2's signal power seen in User 1's unit domain
        return gaussian_prior(mapping, max(self.P_X2 / self.scale1**2, 1e-3))


@dataclass(frozen=True, eq=False)
class BcStates:
    enc1: EncoderState
    enc2: EncoderState
    dec1: DecoderState
    dec2: DecoderState

    @classmethod
    def initial(cls, cfg: BcConfig) -> BcStates:
        p = cfg.user1_params()
        return cls(EncoderState.initial(p), EncoderState.initial(p), DecoderState(), DecoderState())


def bc_encode(cfg: BcConfig, m1, m2, states: BcStates, codes: DpcCodes):
    """Superimpose both users; returns ``(X, X1, X2, states)``."""
    s = cfg.base.s
    if cfg.user1_enabled:
        x1_unit, enc1 = encode_block(cfg.user1_params(), states.enc1, m1, np.zeros(s), codes)
        x1 = cfg.scale1 * x1_unit
    else:
        x1, enc1 = np.zeros(s), states.enc1
    if cfg.user2_enabled:
        c2 = cfg.scale2
        x2_unit, enc2 = encode_block(cfg.user2_params(), states.enc2, m2, x1 / c2, codes)
        x2 = c2 * x2_unit
    else:
        x2, enc2 = np.zeros(s), states.enc2
    return x1 + x2, x1, x2, replace(states, enc1=enc1, enc2=enc2)


def bc_decode_user1(cfg: BcConfig, y1, state: DecoderState, codes: DpcCodes):
    """Receiver 1: prior-weighted demapping over the base alphabet, no modulo."""
    p = cfg.user1_params()
    y = np.asarray(y1, dtype=np.float64) / cfg.scale1
    noise_var = max((cfg.P_X2 + cfg.P_N1) / cfg.scale1**2, MIN_NOISE_VAR)
    llr = demap_llr_with_prior(codes.mapping, y, noise_var, cfg.receiver1_prior())
    llr = np.atleast_2d(llr)
    return ldpc_stage(p, codes, state, *split_llrs(p, codes, llr))


def bc_decode_user2(cfg: BcConfig, y2, state: DecoderState, codes: DpcCodes):
    """Receiver 2: the ordinary DPC decoder in User 2's unit domain."""
    y = np.asarray(y2, dtype=np.float64) / cfg.scale2
    return decode_block(cfg.user2_params(), state, y, codes)


def simulate_broadcast(cfg: BcConfig, codes: DpcCodes, blocks: int, seed: int):
    """Run ``blocks`` blocks; return per-user error counts and measured powers.

    The first block of each stream is warm-up and not counted.
    """
    ss = np.random.SeedSequence(seed)
    r_msg, r_n1, r_n2 = (np.random.default_rng(x) for x in ss.spawn(3))
    k = cfg.base.k
    states = BcStates.initial(cfg)
    sent1, sent2 = [], []
    out = {"errors1": 0, "errors2": 0, "block_errors1": 0, "block_errors2": 0, "bits": 0,
           "power1": 0.0, "power2": 0.0, "power": 0.0}
    for _ in range(blocks):
        m1 = r_msg.integers(0, 2, k, dtype=np.uint8)
        m2 = r_msg.integers(0, 2, k, dtype=np.uint8)
        x, x1, x2, states = bc_encode(cfg, m1, m2, states, codes)
        out["power1"] += float(np.mean(x1**2)) / blocks
        out["power2"] += float(np.mean(x2**2)) / blocks
        out["power"] += float(np.mean(x**2)) / blocks
        y1 = x + r_n1.normal(0, math.sqrt(cfg.P_N1), x.size)
        y2 = x + r_n2.normal(0, math.sqrt(cfg.P_N2), x.size)
        sent1.append(m1)
        sent2.append(m2)
        dec1, dec2 = states.dec1, states.dec2
        if cfg.user1_enabled:
            m1_hat, dec1 = bc_decode_user1(cfg, y1, dec1, codes)
        else:
            m1_hat = None
        if cfg.user2_enabled:
            m2_hat, dec2 = bc_decode_user2(cfg, y2, dec2, codes)
        else:
            m2_hat = None
        states = replace(states, dec1=dec1, dec2=dec2)
        if len(sent1) < 2:
            continue
        out["bits"] += k
        if m1_hat is not None:
            e = int(np.count_nonzero(m1_hat != sent1[-2]))
            out["errors1"] += e
            out["block_errors1"] += e > 0
        if m2_hat is not None:
            e = int(np.count_nonzero(m2_hat != sent2[-2]))
            out["errors2"] += e
            out["block_errors2"] += e > 0
    bits = max(out["bits"], 1)
    out["ber1"] = out["errors1"] / bits
    out["ber2"] = out["errors2"] / bits
    out["snr1_db"] = cfg.snr1_db(out["power1"], out["power2"]) if out["power1"] > 0 else -math.inf
    out["snr2_db"] = cfg.snr2_db(out["power2"]) if out["power2"] > 0 else -math.inf
    return out


def rate_pair_outside_time_sharing(p_total: float, p_n1: float, p_n2: float,
                                   r1: float = 3.0, r2: float = 3.0) -> bool:
    _, chord = bc_capacity_region(p_total, p_n1, p_n2)
    return outside_time_sharing(r1, r2, chord)


def operating_point(p_n1: float, p_n2: float, snr1_db: float, snr2_db: float):
    """Powers ``(P_X1, P_X2)`` reaching the two effective SNRs."""
    p_x2 = p_n2 * 10 ** (snr2_db / 10)
    p_x1 = (p_x2 + p_n1) * 10 ** (snr1_db / 10)
    return p_x1, p_x2


def capacity_pair(p_total: float, beta: float, p_n1: float, p_n2: float):
    r1 = awgn_capacity((1 - beta) * p_total / (beta * p_total + p_n1))
    r2 = awgn_capacity(beta * p_total / p_n2)
    return r1, r2
