"""Run every scenario in a directory, then write gnuplot scripts for each report.

Usage: python3 scripts/run_catalog.py [--scenarios scenarios] [--out runs]
Exit status is the worst per-scenario code (0 ok, 1 verdict, 2 config, 3 numeric).
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from floquet_harris.cli import main as cli_main
from floquet_harris.scenario import emit_plots, output_dir, parse_config


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenarios", default="scenarios", help="directory of *.json scenario files")
    p.add_argument("--out", default="runs", help="root for run directories")
    p.add_argument("--no-plots", action="store_true", help="skip the gnuplot scripts")
    return p.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    code = cli_main(["batch", args.scenarios, "--out", args.out])
    if args.no_plots:
        return code
    for path in sorted(Path(args.scenarios).glob("*.json")):
        report = output_dir(parse_config(path), args.out) / "report.json"
        if not report.exists():
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            scripts = emit_plots(report)
        for s in scripts:
            print(f"plot script: {s}")
    return code


if __name__ == "__main__":
    sys.exit(main())
