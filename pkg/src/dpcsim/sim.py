"""Seeded Monte-Carlo BER experiments and metric reports."""
from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

import numpy as np

from .broadcast import BcConfig, simulate_broadcast
from .channels import (
    DirtyPaperChannel,
    DitherSource,
    InterferenceSource,
    awgn_capacity_snr_for_rate,
    granular_gain_and_shaping_loss,
)
from .pipeline import (
    DecoderState,
    DpcCodes,
    DpcSystemParams,
    EncoderState,
    decode_block,
    encode_block,
    measure_transmit_power,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ["snr_db", "bits", "errors", "ber", "block_errors", "seconds"]
BC_COLUMNS = CSV_COLUMNS + ["errors1", "errors2", "ber1", "ber2", "snr1_db", "snr2_db"]
MODES = ("awgn", "dpc", "broadcast")


@dataclass
class ExperimentConfig:
    mode: str = "dpc"
    n: int = 40000
    k: int = 30000
    k_prime: int = 5000
    M: int = 16
    snr_db: list[float] = field(default_factory=lambda: [19.45])
    blocks: int = 1000
    streams: int = 1
    chunk: int = 10
    min_errors: int = 100
    interference_factor: float = 5.0
    P_X: float | None = None
    dither: bool = False
    seed: int = 1
    ldpc_seed: int = 1
    interleaver_seed: int = 2
    max_iter: int = 50
    decoder: str = "sum-product"
    calibration_symbols: int = 200000
    noiseless: bool = False
    timing: bool = True
    out: str | None = None
    cache_dir: str | None = None
    # broadcast only
    P_N1: float = 0.9
    P_N2: float = 0.09
    beta: float | None = None
    prior: str = "own"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.decoder not in ("sum-product", "min-sum"):
            raise ValueError("decoder must be 'sum-product' or 'min-sum'")
        if self.blocks < 2 * self.streams:
            raise ValueError("need at least two blocks per stream (one is warm-up)")
        if self.streams < 1 or self.chunk < 1:
            raise ValueError("streams and chunk must be positive")
        if not self.snr_db:
            raise ValueError("snr_db must list at least one point")
        if self.interference_factor < 0:
            raise ValueError("interference_factor must be non-negative")
        if self.mode == "broadcast" and self.beta is None:
            raise ValueError("broadcast mode needs beta")
        self.params(1.0)

    def params(self, p_x: float) -> DpcSystemParams:
        p_s = 0.0 if self.mode == "awgn" else self.interference_factor * p_x
        return DpcSystemParams(self.n, self.k, self.k_prime, self.M, P_X=p_x, P_S=p_s,
                               dither=self.dither)

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        parser = configparser.ConfigParser()
        parser.read_string(Path(path).read_text())
        section = parser["experiment"] if parser.has_section("experiment") else parser.defaults()
        return cls.from_mapping(dict(section))

    @classmethod
    def from_mapping(cls, raw: dict) -> ExperimentConfig:
        cfg = cls()
        # INI readers lowercase keys, so match names like P_X case-insensitively
        known = {name.lower(): name for name in asdict(cfg)}
        for key, text in raw.items():
            name = known.get(key.lower())
            if name is None:
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, name, _coerce(name, str(text), getattr(cfg, name)))
        cfg.validate()
        return cfg


def _coerce(key, text, default):
    text = text.strip()
    if key == "snr_db":
        return [float(v) for v in text.replace(",", " ").split()]
    if text.lower() in ("none", "auto", ""):
        return None
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(default, int) and key not in ("P_X", "beta"):
        return int(text)
    if key in ("mode", "decoder", "out", "cache_dir", "prior"):
        return text
    return float(text)


@dataclass
class BerRecord:
    snr_db: float
    bits_simulated: int
    bit_errors: int
    block_errors: int
    wall_time_s: float
    extra: dict = field(default_factory=dict)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_simulated if self.bits_simulated else math.nan

    @property
    def low_confidence(self) -> bool:
        return self.bit_errors < 100

    def row(self, timing=True) -> list:
        seconds = f"{self.wall_time_s:.3f}" if timing else "0"
        base = [f"{self.snr_db:g}", self.bits_simulated, self.bit_errors, f"{self.ber:.6e}",
                self.block_errors, seconds]
        return base + [_fmt(self.extra[c]) for c in BC_COLUMNS[len(CSV_COLUMNS):] if c in self.extra]


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else v


# ---------------------------------------------------------------------------
# single-link streams
# ---------------------------------------------------------------------------

class LinkStream:
    """One causal encoder/channel/decoder chain with its own seeds."""

    def __init__(self, params: DpcSystemParams, codes: DpcCodes, seed_seq: np.random.SeedSequence):
        s_msg, s_int, s_noise, s_dither = seed_seq.spawn(4)
        self.params = params
        self.codes = codes
        self.msg_rng = np.random.default_rng(s_msg)
        self.interference = InterferenceSource(params.P_S, int(s_int.generate_state(1)[0]))
        self.channel = DirtyPaperChannel(params.P_N, int(s_noise.generate_state(1)[0]))
        dseed = int(s_dither.generate_state(1)[0])
        self.tx_dither = DitherSource(dseed, params.M, params.dither)
        self.rx_dither = DitherSource(dseed, params.M, params.dither)
        self.enc = EncoderState.initial(params)
        self.dec = DecoderState()
        self.pending = None
        self.power_sum = 0.0
        self.sent_blocks = 0

    def run(self, blocks: int) -> tuple[int, int, int]:
        """Send ``blocks`` more blocks; return (bits, bit errors, block errors) counted."""
        p = self.params
        bits = errors = block_errors = 0
        for _ in range(blocks):
            m = self.msg_rng.integers(0, 2, p.k, dtype=np.uint8)
            S = self.interference.draw(p.s)
            u_tx = self.tx_dither.draw(p.s) if p.dither else None
            x, self.enc = encode_block(p, self.enc, m, S, self.codes, u_tx)
            self.power_sum += float(np.mean(x**2))
            self.sent_blocks += 1
            y = self.channel(x, S)
            u_rx = self.rx_dither.draw(p.s) if p.dither else None
            m_hat, self.dec = decode_block(p, self.dec, y, self.codes, u_rx)
            if m_hat is not None:
                e = int(np.count_nonzero(m_hat != self.pending))
                bits += p.k
                errors += e
                block_errors += e > 0
            self.pending = m
        return bits, errors, block_errors

    @property
    def measured_power(self) -> float:
        return self.power_sum / max(self.sent_blocks, 1)


def _split_blocks(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (i < extra) for i in range(parts)]


def simulate_point(params: DpcSystemParams, codes: DpcCodes, blocks: int, seed,
                   streams: int = 1, chunk: int = 10, min_errors: int = 0, threads: int = 1):
    """BER at one operating point with adaptive stopping.

    Streams advance in rounds of ``chunk`` blocks; the point stops after the
    round in which the error count reaches ``min_errors`` (0 disables) or the
    block budget runs out. Results do not depend on ``threads``.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    link_streams = [LinkStream(params, codes, ss) for ss in root.spawn(streams)]
    budgets = _split_blocks(blocks, streams)
    bits = errors = block_errors = 0
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        while any(budgets):
            todo = [min(chunk, b) for b in budgets]
            results = list(pool.map(lambda st, nb: st.run(nb), link_streams, todo))
            budgets = [b - t for b, t in zip(budgets, todo)]
            for b, e, be in results:
                bits += b
                errors += e
                block_errors += be
            if min_errors and errors >= min_errors:
                break
    power = float(np.mean([st.measured_power for st in link_streams]))
    return bits, errors, block_errors, power


def calibrate_power(cfg: ExperimentConfig, codes: DpcCodes) -> float:
    """Transmit power of the shaper for this config; fixed point over ``P_X``."""
    guess = 7.93
    for _ in range(3):
        params = cfg.params(guess)
        params = params.with_snr(max(cfg.snr_db))
        blocks = max(1, -(-cfg.calibration_symbols // params.s))
        guess = measure_transmit_power(params, codes, blocks, cfg.seed + 7919)
    return guess


def build_codes(cfg: ExperimentConfig) -> DpcCodes:
    params = cfg.params(1.0)
    return DpcCodes.build(params, cfg.ldpc_seed, cfg.interleaver_seed, cache_dir=cfg.cache_dir,
                          max_iter=cfg.max_iter, min_sum=cfg.decoder == "min-sum")


def run_experiment(cfg: ExperimentConfig, threads: int = 1, codes: DpcCodes | None = None,
                   csv_path=None) -> list[BerRecord]:
    """Run every SNR point of ``cfg``; the CSV is flushed after each point."""
    cfg.validate()
    codes = codes or build_codes(cfg)
    csv_path = csv_path or cfg.out
    p_x = cfg.P_X if cfg.P_X is not None else calibrate_power(cfg, codes)
    log.info("transmit power P_X = %.4f", p_x)
    records = []
    if csv_path:
        Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
    fh = open(csv_path, "w", newline="") if csv_path else io.StringIO()
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BC_COLUMNS if cfg.mode == "broadcast" else CSV_COLUMNS)
        fh.flush()
        for idx, snr in enumerate(cfg.snr_db):
            t0 = time.perf_counter()
            seed = np.random.SeedSequence([cfg.seed, idx])
            if cfg.mode == "broadcast":
                rec = _broadcast_point(cfg, codes, p_x, snr, seed)
            else:
                params = cfg.params(p_x)
                params = replace(params, P_N=0.0) if cfg.noiseless else params.with_snr(snr)
                bits, errors, block_errors, _ = simulate_point(
                    params, codes, cfg.blocks, seed, cfg.streams, cfg.chunk, cfg.min_errors, threads)
                rec = BerRecord(snr, bits, errors, block_errors, 0.0)
            rec.wall_time_s = time.perf_counter() - t0
            if rec.low_confidence:
                log.warning("SNR %.3f dB: only %d bit errors, low confidence", snr, rec.bit_errors)
            records.append(rec)
            writer.writerow(rec.row(cfg.timing))
            fh.flush()
    finally:
        if csv_path:
            fh.close()
        if csv_path:
            sidecar = {"P_X": p_x, "c_star": cfg.params(p_x).c_star, "rate": cfg.params(p_x).rate,
                       "mode": cfg.mode, "n": cfg.n}
            Path(str(csv_path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return records


def _broadcast_point(cfg, codes, unit_power, snr_db, seed):
    """Broadcast row: ``snr_db`` is the total transmit power ``10 log10 P``."""
    base = cfg.params(unit_power)
    bc = BcConfig(base, cfg.beta, 10 ** (snr_db / 10), cfg.P_N1, cfg.P_N2,
                  unit_power1=unit_power, unit_power2=unit_power, prior=cfg.prior)
    res = simulate_broadcast(bc, codes, cfg.blocks, int(seed.generate_state(1)[0]))
    extra = {k: res[k] for k in ("errors1", "errors2", "ber1", "ber2", "snr1_db", "snr2_db")}
    return BerRecord(snr_db, 2 * res["bits"], res["errors1"] + res["errors2"],
                     res["block_errors1"] + res["block_errors2"], 0.0, extra)


def read_records(path) -> list[BerRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [BerRecord(float(r["snr_db"]), int(r["bits"]), int(r["errors"]), int(r["block_errors"]),
                      float(r["seconds"])) for r in rows]


# ---------------------------------------------------------------------------
# thresholds and metrics
# ---------------------------------------------------------------------------

def crossing_snr(records: list[BerRecord], target: float = 1e-5) -> float | None:
    """SNR where BER first reaches ``target``, log-linear between points."""
    pts = sorted((r.snr_db, r.ber) for r in records)
    prev = None
    for snr, ber in pts:
        if ber <= target:
            if prev is None or prev[1] <= target:
                return snr
            s0, b0 = prev
            if ber <= 0:
                return snr
            f = (math.log10(b0) - math.log10(target)) / (math.log10(b0) - math.log10(ber))
            return s0 + f * (snr - s0)
        prev = (snr, ber)
    return None


def find_threshold(params: DpcSystemParams, codes: DpcCodes, lo: float, hi: float,
                   blocks: int, seed: int, target: float = 1e-5, tol: float = 0.05,
                   max_errors: int | None = None) -> float:
    """Bisect the lowest SNR whose measured BER is at most ``target``.

    ``blocks`` blocks are simulated per probe; a probe passes when the error
    count does not exceed ``max_errors`` (default: ``target * bits``).
    """
    def passes(snr):
        p = params.with_snr(snr)
        bits, errors, _, _ = simulate_point(p, codes, blocks, seed)
        allowed = target * bits if max_errors is None else max_errors
        return errors <= allowed

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class Metrics:
    transmit_power: float
    granular_gain_db: float
    shaping_loss_db: float
    operating_snr_db: float | None
    capacity_snr_db: float
    total_gap_db: float | None
    shaping_gap_db: float
    coding_gap_db: float | None

    def table(self) -> str:
        """Fixed-point report; the printed shaping and coding gaps add up to the printed total."""
        q = Decimal("0.0001")

        def dec(v):
            return None if v is None else Decimal(repr(v)).quantize(q, ROUND_HALF_EVEN)

        total, shaping = dec(self.total_gap_db), dec(self.shaping_gap_db)
        coding = None if total is None else total - shaping
        rows = [
            ("transmit power S_x", dec(self.transmit_power)),
            ("granular gain [dB]", dec(self.granular_gain_db)),
            ("shaping loss [dB]", dec(self.shaping_loss_db)),
            ("operating SNR [dB]", dec(self.operating_snr_db)),
            ("capacity SNR [dB]", dec(self.capacity_snr_db)),
            ("total gap [dB]", total),
            ("shaping gap [dB]", shaping),
            ("coding gap [dB]", coding),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {'n/a' if val is None else val}" for name, val in rows)


def report_metrics(transmit_power: float, c_star: float, rate: float,
                   operating_snr_db: float | None) -> Metrics:
    """Gain, loss and the split of the gap to capacity at the operating SNR."""
    gain, loss = granular_gain_and_shaping_loss(c_star, transmit_power)
    cap = awgn_capacity_snr_for_rate(rate)
    total = None if operating_snr_db is None else operating_snr_db - cap
    coding = None if total is None else total - loss
    return Metrics(transmit_power, gain, loss, operating_snr_db, cap, total, loss, coding)
