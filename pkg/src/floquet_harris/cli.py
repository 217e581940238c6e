"""Command-line entry point: run, validate, batch and plots subcommands.

Exit codes: 0 when every verdict passes, 1 when some verdict fails, 2 for
configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import FloquetHarrisError
from .scenario import ConfigError, emit_plots, parse_config, run

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _say(args, *lines) -> None:
    if not args.quiet:
        for line in lines:
            print(line)


def _run_one(path: Path, args) -> int:
    try:
        cfg = parse_config(path)
    except ConfigError as exc:
        print(f"{path}: configuration error", file=sys.stderr)
        for p in exc.problems:
            print(f"  {p}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run(cfg, args.out)
    except (FloquetHarrisError, ValueError, ArithmeticError, NotImplementedError) as exc:
        print(f"{path}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _say(args, f"== {cfg.name} ({cfg.experiment_type}) -> {report.directory}", report.summary())
    if "harris_table" in report.details:
        _say(args, report.details["harris_table"])
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_run(args) -> int:
    return _run_one(Path(args.config), args)


def cmd_validate(args) -> int:
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        for p in exc.problems:
            print(p, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    _say(args, f"{args.config}: ok ({cfg.model_type} / {cfg.experiment_type}, hash {cfg.digest()})")
    return EXIT_OK


def cmd_batch(args) -> int:
    paths = sorted(Path(args.directory).glob("*.json"))
    if not paths:
        print(f"no scenario files in {args.directory}", file=sys.stderr)
        return EXIT_CONFIG
    codes = [_run_one(p, args) for p in paths]
    return max(codes)


def cmd_plots(args) -> int:
    try:
        scripts = emit_plots(args.report)
    except (OSError, json.JSONDecodeError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    _say(args, *(str(s) for s in scripts))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floquet-harris",
                                     description="Floquet eigenelements and Harris certificates for periodic semiflows")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="runs", help="root directory for run outputs (default: runs)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run one scenario")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("validate", parents=[common], help="check a scenario file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("batch", parents=[common], help="run every scenario in a directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_batch)
    p = sub.add_parser("plots", parents=[common], help="write gnuplot scripts for a report")
    p.add_argument("report")
    p.set_defaults(func=cmd_plots)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
