"""Command line entry point.

Exit codes: 0 success, 1 configuration or input error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from nlmc.basis import BasisError
from nlmc.linalg import SolverError
from nlmc.media import MediaError
from nlmc.metrics import reports_to_csv
from nlmc.runner import experiments
from nlmc.runner.config import ConfigError, ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlmc", description="Non-local multicontinuum upscaling experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="experiment config (INI)")
        p.add_argument("-o", "--output", help="output directory (default: [output] directory)")
        p.add_argument("--workers", type=int, help="threads for basis construction")
        return p

    add("generate-media", "write the configured media as grid files plus a manifest")
    add("run-static", "static experiment at the configured (H, m)")
    add("run-transient", "time-dependent experiment at the configured (H, m)")
    add("decay-study", "distance between global and localized bases over m")
    add("sweep", "static runs over the [basis] schedule, one CSV row each")
    p = sub.add_parser("validate-config", help="check a config and print its canonical form")
    p.add_argument("config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.from_file(args.config).validate()
        if args.command == "validate-config":
            sys.stdout.write(cfg.to_text())
            return EXIT_OK
        if args.workers:
            cfg = cfg.with_(workers=args.workers)
        if args.command == "generate-media":
            print(experiments.generate_media(cfg, args.output))
        elif args.command == "run-static":
            res = experiments.run_static_experiment(cfg, args.output)
            sys.stdout.write(reports_to_csv([res.report], with_area=True))
        elif args.command == "run-transient":
            res = experiments.run_transient_experiment(cfg, args.output)
            sys.stdout.write(reports_to_csv([res.report], with_area=True))
        elif args.command == "decay-study":
            _, table = experiments.run_decay_study(cfg, args.output)
            sys.stdout.write(table)
        elif args.command == "sweep":
            _, table = experiments.run_sweep(cfg, args.output)
            sys.stdout.write(table)
    except (ConfigError, MediaError, FileNotFoundError) as exc:
        print(f"nlmc: {_where(exc)}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, BasisError) as exc:
        print(f"nlmc: solver failure: {_where(exc)}{exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _where(exc) -> str:
    stage = getattr(exc, "stage", None)
    return f"[{stage}] " if stage else ""


if __name__ == "__main__":
    sys.exit(main())
