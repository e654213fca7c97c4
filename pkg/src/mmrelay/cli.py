"""``mmrelay`` command line: run or validate an experiment config file."""

from __future__ import annotations

import argparse
import logging
import sys

from .channels import parse_seed
from .config import ConfigError
from .experiments import header_lines, parse_config, run_experiment
from .montecarlo import ResourceLimitError


def _positive_int(text):
    value = int(text, 0)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text):
    try:
        return parse_seed(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmrelay", description="Multipair massive-MIMO relaying experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write its CSV")
    run.add_argument("config")
    run.add_argument("--seed", type=_seed)
    run.add_argument("--trials", type=_positive_int)
    run.add_argument("--out")
    val = sub.add_parser("validate", help="check a config file and print the resolved settings")
    val.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg, spec = parse_config(args.config)
        if args.command == "validate":
            print("\n".join(line[2:] for line in header_lines(spec)))
            return 0
        changes = {k: getattr(args, k) for k in ("seed", "trials") if getattr(args, k) is not None}
        if changes:
            spec = spec.replace(**changes)
        run_experiment(spec, out=args.out)
    except ConfigError as err:
        print(f"mmrelay: invalid config: {err}", file=sys.stderr)
        return 2
    except (OSError, ResourceLimitError, ValueError) as err:
        print(f"mmrelay: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
