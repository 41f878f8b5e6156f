"""Command-line entry point: ``genqcp {run,bruteforce,moments,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 run aborted mid-way.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiment import (
    ConfigError,
    ExperimentConfig,
    RunAborted,
    report_json,
    run_bruteforce,
    run_moments,
    run_qcp,
    run_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genqcp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "iterated update loop"),
                        ("bruteforce", "exhaustive classical optimum"),
                        ("moments", "exact vs sampled moment matrices"),
                        ("sweep", "independent runs over seeds / sample counts")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="TOML experiment config")
        sp.add_argument("--seed", type=int, help="override master seed")
        sp.add_argument("--out", help="write the JSON report here")
        mode = sp.add_mutually_exclusive_group()
        mode.add_argument("--exact", action="store_true", help="exact moment matrices")
        mode.add_argument("--sampled", type=int, metavar="M", help="sampled moments, M shots")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            sp.add_argument("--jobs", type=int, default=1)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ExperimentConfig.from_toml(args.config)
        if args.seed is not None:
            config.master_seed = args.seed
        if args.out:
            config.output = args.out
        if args.exact:
            config.estimation = "exact"
        elif args.sampled is not None:
            config.estimation, config.samples = "sampled", args.sampled
        config.validate()
        if args.command == "run":
            report = run_qcp(config)
        elif args.command == "bruteforce":
            report = run_bruteforce(config)
        elif args.command == "moments":
            report = run_moments(config)
        else:
            report = run_sweep(config, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunAborted as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        if not config.output:
            print(report_json(exc.report))
        return EXIT_ABORT
    if not config.output:
        print(report_json(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
