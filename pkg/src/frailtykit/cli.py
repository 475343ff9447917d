"""Command-line interface: fit, simulate, mc-study, compare.

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from ._version import __version__
from . import dataio
from .dataio import ParseError
from .inference import InitializationError, fit_model
from .likelihood import resolve_model_spec
from .mcstudy import default_workers, run_monte_carlo
from .simulate import simulate_dataset
from .waic import compare as waic_compare

log = logging.getLogger("frailtykit")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 with usage instead of argparse's exit 2
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frailtykit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"frailtykit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model to a dataset CSV")
    fit.add_argument("--data", required=True, help="dataset CSV path")
    fit.add_argument("--model", required=True, choices=["pe", "bp"])
    fit.add_argument("--frailty", required=True, choices=["gamma", "none"])
    fit.add_argument("--intervals", type=int, help="PE interval count J")
    fit.add_argument("--degree", type=int, help="BP polynomial degree")
    fit.add_argument("--tau", type=float, help="BP horizon (default 1.01 x max time)")
    fit.add_argument("--iter", type=int, default=10000, dest="iterations")
    fit.add_argument("--burnin", type=int, default=5000)
    fit.add_argument("--thin", type=int, default=1)
    fit.add_argument("--chains", type=int, default=4)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--save-draws", action="store_true", help="also write draws.csv")

    sim = sub.add_parser("simulate", help="generate a dataset from a scenario config")
    sim.add_argument("--config", required=True, help="scenario JSON path")
    sim.add_argument("--out", required=True)

    study = sub.add_parser("mc-study", help="run a Monte Carlo simulation study")
    study.add_argument("--config", required=True, help="scenario JSON path")
    study.add_argument("--replicas", type=int, required=True)
    study.add_argument("--out", required=True)
    study.add_argument("--workers", type=int, help="parallel replica processes")

    cmp_cmd = sub.add_parser("compare", help="rank fit reports by WAIC")
    cmp_cmd.add_argument("--runs", nargs="+", required=True, help="fit_report.json paths")
    cmp_cmd.add_argument("--out", required=True)
    return parser


def _cmd_fit(args) -> int:
    records = dataio.read_dataset(args.data)
    cov_names = dataio.read_covariate_names(args.data)
    if args.model == "pe" and args.intervals is None:
        raise UsageError("--intervals is required with --model pe")
    if args.model == "bp" and args.degree is None:
        raise UsageError("--degree is required with --model bp")
    spec = resolve_model_spec(
        records,
        baseline=args.model,
        frailty=args.frailty,
        n_intervals=args.intervals,
        degree=args.degree,
        horizon=args.tau,
    )
    settings = {
        "iterations": args.iterations,
        "burnin": args.burnin,
        "thin": args.thin,
        "chains": args.chains,
    }
    start = time.perf_counter()
    result = fit_model(
        records,
        spec,
        iterations=args.iterations,
        burnin=args.burnin,
        thin=args.thin,
        chains=args.chains,
        seed=args.seed,
        covariate_names=cov_names,
    )
    elapsed = time.perf_counter() - start
    report = dataio.FitReport(
        result=result, seed=args.seed, wall_clock_seconds=elapsed, settings=settings
    )
    paths = dataio.write_fit_outputs(report, args.out, save_draws=args.save_draws)
    log.info("fit finished in %.1fs; wrote %s", elapsed, paths["report"])
    if result.diagnostics.available and result.diagnostics.max_rhat() > 1.1:
        log.warning("max split R-hat %.3f > 1.1: chains may not have converged",
                    result.diagnostics.max_rhat())
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenario, _ = dataio.load_scenario_config(args.config)
    records = simulate_dataset(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "dataset.csv"
    dataio.write_dataset(path, records, seed=scenario.seed)
    log.info("wrote %d records to %s", len(records), path)
    return EXIT_OK


def _cmd_mc_study(args) -> int:
    scenario, settings = dataio.load_scenario_config(args.config)
    workers = args.workers if args.workers is not None else default_workers()
    result = run_monte_carlo(
        scenario, args.replicas, settings=settings, workers=workers
    )
    paths = dataio.write_mc_outputs(result, args.out)
    log.info("wrote %s and %s", paths["metrics"], paths["replicas"])
    if result.study_failed:
        log.error(
            "study failed: %d/%d replicas flagged", result.n_flagged, result.n_replicas
        )
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_compare(args) -> int:
    if len(args.runs) < 2:
        raise UsageError("compare needs at least two --runs fit reports")
    results = {}
    for run in args.runs:
        name = Path(run).parent.name or Path(run).stem
        if name in results:
            name = f"{name}:{Path(run).stem}"
        if name in results:
            raise UsageError(f"duplicate run label {name!r}; use distinct directories")
        results[name] = dataio.waic_result_from_report(dataio.load_fit_report(run))
    rows = waic_compare(results)
    path = dataio.write_compare_report(rows, args.out)
    log.info("best model: %s (waic %.4f); wrote %s", rows[0]["model"], rows[0]["waic"], path)
    return EXIT_OK


_HANDLERS = {
    "fit": _cmd_fit,
    "simulate": _cmd_simulate,
    "mc-study": _cmd_mc_study,
    "compare": _cmd_compare,
}


def cli_dispatch(argv: Sequence[str]) -> int:
    """Parse arguments, run the subcommand, and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InitializationError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
