"""Batch command line: tskit <config-path> [--out DIR] [--quiet].

Exit codes: 0 success, 1 task failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, TskitError
from .runner import run_task


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tskit",
        description="Run one timestepper-analysis task from a TOML config file.",
    )
    parser.add_argument("config", help="path to the run configuration file")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument(
        "--quiet", action="store_true", help="suppress the report on stdout"
    )
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_task(config, out_override=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TskitError as exc:
        print(f"task failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    if not args.quiet:
        print(report.render(), end="")
    return 0 if report.converged else 1


if __name__ == "__main__":
    sys.exit(main())
