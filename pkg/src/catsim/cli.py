"""Command line entry point.

Subcommands: gen-trace (synthetic trace CSV), simulate (full sweep with all
report artifacts), train (regression models from transfer logs), report
(re-aggregate previously written logs).  Set CAT_SCHED_LOG=debug|info|warning
for diagnostic verbosity.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import predictor, reporting
from .config import ConfigError, load_config
from .simulator import sweep
from .trace import DEFAULT_CAP_MAX_MBPS, PROFILES, generate_synthetic_trace, write_trace_csv

log = logging.getLogger("catsim")

DEFAULT_BIN_WIDTHS = {"rsrp": 2.0, "rsrq": 0.5, "snr": 2.0, "cqi": 1.0, "payload": 0.25}


def _write_artifacts(reports, deadlines, out_dir: str, experiment: str) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(artifact, name: str):
        path = out / f"{experiment}_{name}.csv"
        reporting.export_csv(artifact, str(path))
        written.append(path)
        log.info("wrote %s", path)

    emit(reporting.summarize(reports), "summary")
    emit(reporting.dmr_table(reports, deadlines), "dmr")
    records = [rec for r in reports for rec in r.records]
    series = [
        reporting.binned_correlation(records, indicator, width)
        for indicator, width in DEFAULT_BIN_WIDTHS.items()
    ]
    emit(series, "correlation")
    emit(reporting.TransferLog(tuple(reports)), "transfers")
    emit(reporting.PacketLog(tuple(reports)), "packets")
    return written


def cmd_gen_trace(args: argparse.Namespace) -> int:
    profile = PROFILES[args.profile]
    trace = generate_synthetic_trace(
        profile,
        duration=args.duration,
        sample_period=args.sample_period,
        seed=args.seed,
        cap_max=args.cap_max,
    )
    write_trace_csv(trace, args.out)
    print(f"wrote {len(trace)} samples ({trace.duration:.0f} s, {args.profile}) to {args.out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.jobs is not None:
        cfg.jobs = args.jobs
    traces = cfg.build_traces()
    policies = cfg.build_policies()
    log.info(
        "sweep: %d policies x %d traces x %d runs", len(policies), len(traces),
        cfg.runs_per_pair,
    )
    reports = sweep(
        policies, traces, cfg.sensor, cfg.runs_per_pair, base_seed=cfg.base_seed,
        jobs=cfg.jobs,
    )
    truncated = sum(1 for r in reports if r.truncated)
    if truncated:
        log.warning("%d of %d runs were truncated at the trace end", truncated, len(reports))
    written = _write_artifacts(reports, cfg.deadlines, cfg.output_dir, cfg.experiment)
    for stats_policy, kpis in reporting.summarize(reports).items():
        goodput = kpis.get(reporting.GOODPUT_KPI)
        if goodput:
            print(f"{stats_policy}: mean goodput {goodput.mean:.2f} MBit/s "
                  f"({goodput.count} transfers)")
    print(f"wrote {len(written)} artifacts to {cfg.output_dir}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    dataset = predictor.load_dataset(args.dataset)
    if len(dataset) < args.folds:
        print(f"error: dataset has {len(dataset)} rows, fewer than {args.folds} folds",
              file=sys.stderr)
        return 1
    metrics = predictor.cross_validate(dataset, k=args.folds, learner=args.learner,
                                       seed=args.seed)
    corr = "undefined" if math.isnan(metrics.correlation) else f"{metrics.correlation:.3f}"
    print(f"{args.learner}: correlation {corr}, MAE {metrics.mae:.3f} MBit/s, "
          f"RMSE {metrics.rmse:.3f} MBit/s ({args.folds}-fold CV, {len(dataset)} samples)")
    if args.learner == "linear":
        model = predictor.train_linear(dataset)
    else:
        model = predictor.train_model_tree(dataset)
    predictor.save_model(model, args.out)
    print(f"wrote model to {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    reports = []
    for path in args.logs:
        reports.extend(reporting.load_run_log(path))
    if not any(r.records or r.ages for r in reports):
        print("error: no usable rows in the given logs", file=sys.stderr)
        return 1
    deadlines = tuple(args.deadlines) if args.deadlines else (30.0, 60.0, 120.0, 180.0)
    written = _write_artifacts(reports, deadlines, args.out, args.experiment)
    print(f"wrote {len(written)} artifacts to {args.out}")
    return 0


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catsim",
        description="Channel-aware transmission scheduling: traces, simulation sweeps, "
                    "data-rate prediction and KPI reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="generate a synthetic channel trace CSV")
    p.add_argument("--profile", choices=sorted(PROFILES), default="suburban")
    p.add_argument("--duration", type=_positive_float, required=True,
                   help="trace duration in seconds")
    p.add_argument("--sample-period", type=_positive_float, default=1.0)
    p.add_argument("--cap-max", type=_positive_float, default=DEFAULT_CAP_MAX_MBPS,
                   help="capacity at 30 dB SNR in MBit/s")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("simulate", help="run a configured sweep and write report CSVs")
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the config base seed")
    p.add_argument("--out", default=None, help="override the config output directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a data-rate model from a transfer log")
    p.add_argument("dataset", help="transfer log or measurement CSV")
    p.add_argument("--learner", choices=("model_tree", "linear"), default="model_tree")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="re-aggregate previously written run logs")
    p.add_argument("logs", nargs="+", help="transfer and/or packet log CSVs")
    p.add_argument("--experiment", default="report", help="output file name prefix")
    p.add_argument("--deadlines", type=float, nargs="+", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("CAT_SCHED_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
