"""Command-line front end.

    wavekin train-sce  [--config F] [--seed N] [--out DIR] [--threads N] [--print-config]
    wavekin train-wke  ...
    wavekin run-fvs    ...
    wavekin analyze    ...
    wavekin compare    ...

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import config
from .errors import ConfigError, DomainError, NumericError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = {
    "train-sce": ("sce", "train the coagulation network and score it against the exact solution"),
    "train-wke": ("wke", "multi-stage training of the 3-wave kinetic network"),
    "run-fvs": ("fvs", "finite-volume reference run with energy and positivity tracking"),
    "analyze": ("analyze", "fit log-log energy decay slopes to energy CSVs"),
    "compare": ("compare", "compare a trained network with FVS snapshots"),
}
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavekin", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML file with a table for this experiment")
        p.add_argument("--seed", type=int, help="network initialisation seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="BLAS/OpenMP thread count")
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved configuration and exit")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        # effective only if numpy has not been imported yet
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    kind = COMMANDS[args.command][0]
    try:
        exp = config.load(kind, args.config, seed=args.seed, output_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        print(config.describe(exp))
        return EXIT_OK

    from .experiments import RUNNERS
    try:
        summary = RUNNERS[kind](exp)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, DomainError, FloatingPointError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.command}: outputs in {exp.output_dir}")
    for key in ("sup_error", "slope", "first_failure_step", "fits"):
        if key in summary:
            print(f"  {key}: {summary[key]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
