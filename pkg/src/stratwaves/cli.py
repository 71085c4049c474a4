"""Command-line entry point.

Usage: ``stratwaves --config cfg.txt --out results/ [--seed 7]
[--set key=value ...]``.  The experiment command itself lives in the
config file.  Exit codes: 0 success, 2 configuration problem,
3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .dynamics import NumericsError
from .experiments import ConfigError, parse_config, run

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stratwaves",
        description="Run a stratified-flow amplitude experiment described by a config file.",
    )
    parser.add_argument("--config", required=True, help="path to the experiment config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="seed for random initial data")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    args = parser.parse_args(argv)

    try:
        text = open(args.config).read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        config, spec = parse_config(text, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        written = run(config, spec, args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO

    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
