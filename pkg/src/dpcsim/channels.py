"""Channel models and information-theoretic reference numbers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ULTIMATE_SHAPING_GAIN_DB = 10 * math.log10(math.pi * math.e / 6)


@dataclass
class DitherSource:
    """Shared dither, uniform on ``[-M/2, M/2)`` per symbol, or all zeros when off.

    Transmitter and receiver build one each from the same seed and draw blocks
    in the same order.
    """

    seed: int
    M: int = 16
    enabled: bool = False

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)

    def draw(self, count: int) -> np.ndarray:
        if not self.enabled:
            return np.zeros(count)
        return self._rng.uniform(-self.M / 2, self.M / 2, size=count)


class DirtyPaperChannel:
    """``Y = X + S + N`` with i.i.d. Gaussian noise of variance ``noise_var``."""

    def __init__(self, noise_var: float, seed: int):
        if noise_var < 0:
            raise ValueError("noise variance must be non-negative")
        self.noise_var = noise_var
        self.rng = np.random.default_rng(seed)

    def __call__(self, x, s=None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        s = np.zeros_like(x) if s is None else np.asarray(s, dtype=np.float64)
        if s.shape != x.shape:
            raise ValueError("signal and interference lengths differ")
        noise = self.rng.normal(0.0, math.sqrt(self.noise_var), size=x.shape)
        return x + s + noise


def dirty_paper_channel(x, s, noise_var: float, seed: int) -> np.ndarray:
    return DirtyPaperChannel(noise_var, seed)(x, s)


class InterferenceSource:
    """Known interference ``S``: i.i.d. Gaussian of power ``power``, or a fixed file-backed array."""

    def __init__(self, power: float, seed: int, samples: np.ndarray | None = None):
        self.power = power
        self.rng = np.random.default_rng(seed)
        self.samples = None if samples is None else np.asarray(samples, dtype=np.float64)
        self._pos = 0

    @classmethod
    def from_file(cls, path) -> InterferenceSource:
        data = np.fromfile(path, dtype="<f8")
        return cls(float(np.mean(data**2)), 0, data)

    def draw(self, count: int) -> np.ndarray:
        if self.samples is not None:
            idx = (self._pos + np.arange(count)) % self.samples.size
            self._pos = (self._pos + count) % self.samples.size
            return self.samples[idx]
        if self.power == 0:
            return np.zeros(count)
        return self.rng.normal(0.0, math.sqrt(self.power), size=count)


def mmse_alpha(p_x: float, p_n: float) -> float:
    return p_x / (p_x + p_n)


def awgn_capacity_snr_for_rate(rate_bits: float) -> float:
    """SNR in dB at which the real AWGN channel has capacity ``rate_bits``."""
    if rate_bits <= 0:
        raise ValueError("rate must be positive")
    return 10 * math.log10(2 ** (2 * rate_bits) - 1)


def awgn_capacity(snr_linear: float) -> float:
    return 0.5 * math.log2(1 + snr_linear)


def lattice_rate_bound(snr_linear: float, g_norm: float) -> float:
    """Achievable-rate lower bound of the modulo-lattice channel."""
    return awgn_capacity(snr_linear) - 0.5 * math.log2(2 * math.pi * math.e * g_norm)


def bc_rates(p_total: float, p_n1: float, p_n2: float, beta):
    """Boundary rates ``(R1, R2)`` of the degraded Gaussian broadcast channel."""
    beta = np.asarray(beta, dtype=np.float64)
    r1 = 0.5 * np.log2(1 + (1 - beta) * p_total / (beta * p_total + p_n1))
    r2 = 0.5 * np.log2(1 + beta * p_total / p_n2)
    return r1, r2


def bc_capacity_region(p_total: float, p_n1: float, p_n2: float, betas=None):
    """Capacity boundary over a ``beta`` grid plus the time-sharing chord.

    Returns ``(boundary, chord)``: lists of ``(beta, R1, R2)`` and of the two
    single-user corner points ``(R1, R2)``.
    """
    if not p_n1 > p_n2 > 0:
        raise ValueError("receiver 1 must be the degraded (noisier) one")
    if betas is None:
        betas = np.linspace(0.0, 1.0, 201)
    r1, r2 = bc_rates(p_total, p_n1, p_n2, betas)
    boundary = [(float(b), float(a), float(c)) for b, a, c in zip(betas, r1, r2)]
    chord = [(awgn_capacity(p_total / p_n1), 0.0), (0.0, awgn_capacity(p_total / p_n2))]
    return boundary, chord


def outside_time_sharing(r1: float, r2: float, chord) -> bool:
    """True when ``(r1, r2)`` lies strictly beyond the time-sharing line."""
    (c1, _), (_, c2) = chord
    return r1 / c1 + r2 / c2 > 1.0


def granular_gain_and_shaping_loss(c_star: float, s_x: float) -> tuple[float, float]:
    """Granular gain and finite-rate shaping loss, both in dB.

    ``c_star`` is the rate in bits/symbol entering the mapper, ``s_x`` the
    measured transmit power. The reference is a uniform (cubic) signal of
    ``2**c_star`` unit cells per dimension, whose power is ``2**(2 c_star)/12``.
    """
    if s_x <= 0:
        raise ValueError("transmit power must be positive")
    gain = 2 ** (2 * c_star) / (12 * s_x)
    g_norm = 1 / (12 * gain)
    big = 2 ** (2 * c_star)
    loss = 10 * math.log10((2 * math.pi * math.e * g_norm * big - 1) / (big - 1))
    return 10 * math.log10(gain), loss
