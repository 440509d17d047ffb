"""Command-line entry point: ``lfikit {curve,dist,abc,bolfi,budget}``.

Exit codes: 0 success, 2 configuration error, 3 simulation budget exhausted,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .bo import BOLFIError
from .discrepancy import LDAFitError
from .gp import GPFitError
from .harness import EXPERIMENTS, ConfigError, build_config, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("lfikit")

HELP = {
    "curve": "discriminability vs theta at large n",
    "dist": "distribution of the stochastic discrepancy at small n",
    "abc": "rejection ABC with the classifier discrepancy",
    "bolfi": "GP-guided acquisition loop with per-step surrogate snapshots",
    "budget": "simulation counts: rejection ABC vs the acquisition loop",
}


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfikit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=_u64, required=True, help="root seed (mandatory)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value; repeatable")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args.command, args.seed, args.out, args.config, args.set)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg)
    except (GPFitError, LDAFitError, BOLFIError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    for path in result.files:
        log.info("wrote %s", path)
    if result.summary:
        print(" ".join(f"{k}={v}" for k, v in result.summary.items()))
    if result.status == "budget_exhausted":
        print("budget exhausted before enough acceptances", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
