"""Command-line runner.

Exit codes: 0 on success, 2 on configuration errors, 3 when a captured
sequence cannot be synchronised to the PRBS.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .analysis import RunStatistics
from .errors import ConfigError, SyncError
from .experiments import (
    FOUR_CHANNEL_RATE,
    SINGLE_CHANNEL_RATE,
    run_block,
    run_four_channel,
    run_single_channel,
    sweep_crosstalk,
)
from .fec_budget import POST_FEC_TARGET, budget_table, net_bit_rate, overhead, post_fec_bound
from .mode_catalog import ModeBasis, group_delay, propagation_constant
from .transceiver import eye_points, save_capture

EXIT_OK, EXIT_CONFIG, EXIT_SYNC = 0, 2, 3

DEFAULT_XT_GRID = (-25.0, -22.0, -19.0, -16.0, -13.0)
DEFAULT_BER_GRID = (1e-6, 1e-5, 1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3)


def _fmt(x: float) -> str:
    return f"{x:.6e}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_run_outputs(stats: RunStatistics, config: cfgmod.RunConfig, out: Path, experiment: str):
    out.mkdir(parents=True, exist_ok=True)
    seq_rows, hist_rows = [], []
    summary_channels = {}
    for m, ch in stats.channels.items():
        for rep, uni in zip(ch.reports, ch.uniformity):
            p = "" if uni is None else _fmt(uni.p_value)
            seq_rows.append([m, rep.sequence_index, rep.bits_compared, rep.error_count, _fmt(rep.ber), p])
        for b in ch.histogram:
            hist_rows.append([m, _fmt(b.low), _fmt(b.high), b.count])
        worst = max(ch.ber_trace)
        bound_avg = post_fec_bound(min(ch.average_ber, 0.5), config.fec)
        bound_worst = post_fec_bound(min(worst, 0.5), config.fec)
        summary_channels[str(m)] = {
            "sequences": len(ch.reports),
            "total_bits": ch.total_bits,
            "total_errors": ch.total_errors,
            "average_ber": ch.average_ber,
            "max_ber": worst,
            "min_ber": min(ch.ber_trace),
            "median_q": float(np.median([r.q_factor for r in ch.reports])),
            "post_fec_bound": bound_avg,
            "fec_pass": bound_avg < POST_FEC_TARGET,
            "fec_pass_worst_sequence": bound_worst < POST_FEC_TARGET,
        }
    _write_csv(out / "sequences.csv",
               ["channel", "sequence_index", "bits", "errors", "ber", "uniformity_p"], seq_rows)
    _write_csv(out / "histogram.csv", ["channel", "bin_low", "bin_high", "count"], hist_rows)
    oh = overhead(config.fec)
    lanes = len(config.channels)
    summary = {
        "experiment": experiment,
        "channels": summary_channels,
        "fec": {
            "n": config.fec.n, "k": config.fec.k, "b": config.fec.b, "t": config.fec.t,
            "overhead": oh,
            "target": POST_FEC_TARGET,
            "pass": all(c["fec_pass"] for c in summary_channels.values()),
        },
        "gross_bit_rate": lanes * config.tx.bit_rate,
        "net_bit_rate": net_bit_rate(lanes, config.tx.bit_rate, oh),
        "q_note": "median_q is a simulation-internal estimate from soft values",
    }
    _write_json(out / "summary.json", summary)


def _load_config(args) -> cfgmod.RunConfig:
    config = cfgmod.load(args.config) if args.config else cfgmod.default_config()
    if getattr(args, "sequences", None):
        config = config.replace(sequences=args.sequences)
    return config


def cmd_modes(args) -> int:
    config = _load_config(args)
    basis = ModeBasis.from_orders(config.fiber, config.channels)
    tau0 = min(group_delay(m, config.fiber) for m in basis.orders)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["group", "mode", "beta_rad_per_m", "group_delay_s_per_m", "differential_delay_s"])
    for g in basis.groups:
        beta = propagation_constant(g.order, config.fiber)
        tau = group_delay(g.order, config.fiber)
        for mode in g:
            writer.writerow([g.order, mode.label, repr(beta), repr(tau),
                             _fmt((tau - tau0) * config.fiber.L)])
    return EXIT_OK


def cmd_run_single(args) -> int:
    config = _load_config(args)
    stats = run_single_channel(config, workers=args.workers)
    write_run_outputs(stats, config, Path(args.out), "single-channel")
    return EXIT_OK


def cmd_run_four(args) -> int:
    config = _load_config(args)
    stats = run_four_channel(config, workers=args.workers)
    write_run_outputs(stats, config, Path(args.out), "four-channel")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args)
    grid = args.grid or DEFAULT_XT_GRID
    rows = sweep_crosstalk(config, grid, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", ["xt_db", "channel", "average_ber"],
               [[f"{xt:g}", m, _fmt(ber)] for xt, m, ber in rows])
    return EXIT_OK


def cmd_fec(args) -> int:
    config = _load_config(args)
    rows = budget_table(config.fec, args.ber or DEFAULT_BER_GRID)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["pre_fec_ber", "post_fec_bound", "below_1e-12"])
    for pre, bound, ok in rows:
        writer.writerow([_fmt(pre), _fmt(bound), int(ok)])
    return EXIT_OK


def cmd_eye(args) -> int:
    config = _load_config(args)
    if args.group not in config.channels:
        raise ConfigError(f"group {args.group} is not one of the configured channels {config.channels}")
    p = config.channels.index(args.group)
    if args.four:
        active = tuple(range(len(config.channels)))
        rate = FOUR_CHANNEL_RATE
    else:
        active = (p,)
        rate = SINGLE_CHANNEL_RATE
    cap = config.capture if config.capture.scope_rate else replace(config.capture, scope_rate=rate)
    results, captures = run_block(config, args.sequence, active, (p,), cap, keep_capture=True)
    capture = captures[args.group]
    phase, amp = eye_points(capture, config.tx, results[0].sync, n_bits=args.bits)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "eye.csv", ["phase_in_bits", "amplitude"],
               [[f"{ph:.4f}", _fmt(a)] for ph, a in zip(phase, amp)])
    if args.save_capture:
        save_capture(out / f"capture_mg{args.group}_seq{args.sequence}.bin", capture,
                     seed=config.master_seed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgdm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, out=True, workers=True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", "-c", help="run configuration JSON")
        if out:
            p.add_argument("--out", "-o", default="results", help="output directory")
        if workers:
            p.add_argument("--workers", type=int, default=1)
            p.add_argument("--sequences", type=int, help="override the number of sequences")
        p.set_defaults(func=func)
        return p

    add("modes", cmd_modes, "print mode-group tables, beta and delays", out=False, workers=False)
    add("run-single", cmd_run_single, "one channel at a time, 80 GSa/s capture")
    add("run-four", cmd_run_four, "four simultaneous channels, 40 GSa/s capture")
    sweep = add("sweep-xt", cmd_sweep, "average BER versus mean inter-group crosstalk")
    sweep.add_argument("--grid", type=float, nargs="+", help="xt_db values")
    fec = add("fec-budget", cmd_fec, "post-FEC bound table as CSV", out=False, workers=False)
    fec.add_argument("--ber", type=float, nargs="+", help="pre-FEC BER grid")
    eye = add("eye", cmd_eye, "eye-diagram CSV of one captured sequence", workers=False)
    eye.add_argument("--group", type=int, default=4)
    eye.add_argument("--sequence", type=int, default=0)
    eye.add_argument("--bits", type=int, default=1000)
    eye.add_argument("--four", action="store_true", help="all transmitters active")
    eye.add_argument("--save-capture", action="store_true",
                     help="also write the capture as float32 with a JSON header")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SyncError as exc:
        print(f"sync failure: {exc}", file=sys.stderr)
        return EXIT_SYNC


if __name__ == "__main__":
    sys.exit(main())
