"""Command-line entry point: ``dpcsim {simulate,metrics,region,selftest}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .channels import bc_capacity_region, outside_time_sharing
from .sim import ExperimentConfig, crossing_snr, read_records, report_metrics, run_experiment


def _simulate(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    if not cfg.out:
        print("error: no output path (config 'out' or --out)", file=sys.stderr)
        return 2
    records = run_experiment(cfg, threads=args.threads)
    for rec in records:
        flag = "  (low confidence)" if rec.low_confidence else ""
        print(f"SNR {rec.snr_db:7.3f} dB  BER {rec.ber:.3e}  "
              f"({rec.bit_errors}/{rec.bits_simulated}){flag}")
    return 0


def _metrics(args) -> int:
    side = json.loads(Path(str(args.run) + ".json").read_text())
    snr = args.snr
    if snr is None:
        snr = crossing_snr(read_records(args.run), args.target)
    power = args.power if args.power is not None else side["P_X"]
    m = report_metrics(power, side["c_star"], side["rate"], snr)
    print(m.table())
    if args.out:
        Path(args.out).write_text(json.dumps(m.__dict__, indent=2) + "\n")
    return 0


def _region(args) -> int:
    betas = np.linspace(0, 1, args.points)
    boundary, chord = bc_capacity_region(args.power, args.pn1, args.pn2, betas)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["kind", "beta", "R1", "R2"])
        for beta, r1, r2 in boundary:
            w.writerow(["boundary", f"{beta:.6g}", f"{r1:.9g}", f"{r2:.9g}"])
        for r1, r2 in chord:
            w.writerow(["time_sharing", "", f"{r1:.9g}", f"{r2:.9g}"])
    finally:
        if args.out:
            out.close()
    if args.rate_pair:
        r1, r2 = args.rate_pair
        where = "outside" if outside_time_sharing(r1, r2, chord) else "inside"
        print(f"rate pair ({r1:g}, {r2:g}) is {where} the time-sharing region", file=sys.stderr)
    return 0


def _selftest(args) -> int:
    import pytest

    here = Path(__file__).resolve().parents[2] / "tests"
    target = [str(here)] if here.exists() else ["--pyargs", "dpcsim"]
    return pytest.main(["-q", "-m", "not slow"] + target + list(args.pytest_args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpcsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a BER experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_simulate)

    p = sub.add_parser("metrics", help="gain, loss and gap split for a finished run")
    p.add_argument("run", help="CSV written by 'simulate'")
    p.add_argument("--snr", type=float, help="operating SNR in dB (default: BER crossing)")
    p.add_argument("--power", type=float, help="override the measured transmit power")
    p.add_argument("--target", type=float, default=1e-5)
    p.add_argument("--out")
    p.set_defaults(func=_metrics)

    p = sub.add_parser("region", help="broadcast capacity region as CSV")
    p.add_argument("--power", type=float, required=True, help="total transmit power P")
    p.add_argument("--pn1", type=float, default=0.9)
    p.add_argument("--pn2", type=float, default=0.09)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--rate-pair", type=float, nargs=2, metavar=("R1", "R2"))
    p.add_argument("--out")
    p.set_defaults(func=_region)

    p = sub.add_parser("selftest", help="run the fast property suites")
    p.add_argument("pytest_args", nargs="*")
    p.set_defaults(func=_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
