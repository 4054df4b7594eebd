"""Command-line interface for the benchmark runner.

Subcommands::

    cdbands run --config cfg.json [--workers N] [--out results.csv]
    cdbands summarize --in results.csv --out summary.csv
    cdbands partition-dump --config cfg.json --out partition.csv

The default worker count comes from the CDBANDS_WORKERS environment
variable (1 if unset).  Exit status is 0 on success and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .runner import (
    ConfigError,
    ExperimentConfig,
    partition_dump,
    read_csv,
    run_experiment,
    summarize,
    write_csv,
    write_summary_csv,
)


def _default_workers() -> int:
    raw = os.environ.get("CDBANDS_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdbands", description="Prediction-band benchmark runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="path to a JSON config file")
    run_p.add_argument(
        "--workers",
        type=int,
        default=_default_workers(),
        help="replicate-level worker processes (default: CDBANDS_WORKERS or 1)",
    )
    run_p.add_argument("--out", default="results.csv", help="output CSV path")

    sum_p = sub.add_parser("summarize", help="aggregate a results CSV")
    sum_p.add_argument("--in", dest="input", required=True, help="results CSV path")
    sum_p.add_argument("--out", required=True, help="summary CSV path")

    part_p = sub.add_parser(
        "partition-dump", help="write calibration features with partition elements"
    )
    part_p.add_argument("--config", required=True, help="path to a JSON config file")
    part_p.add_argument("--out", required=True, help="output CSV path")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = ExperimentConfig.from_json(args.config)
            records = run_experiment(config, workers=args.workers)
            write_csv(records, args.out)
            print(f"wrote {len(records)} records to {args.out}")
        elif args.command == "summarize":
            rows = summarize(read_csv(args.input))
            write_summary_csv(rows, args.out)
            print(f"wrote {len(rows)} summary rows to {args.out}")
        else:  # partition-dump
            config = ExperimentConfig.from_json(args.config)
            partition_dump(config, args.out)
            print(f"wrote partition dump to {args.out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
