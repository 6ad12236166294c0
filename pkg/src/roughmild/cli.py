"""Command-line entry point: ``roughmild verify|solve|montecarlo``.

Exit codes: 0 success, 1 failed checks or aggregates, 2 usage or
configuration error, 3 solver failure.
"""

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import ALL_SUITES, EXPERIMENTS, RunConfig, load_config
from .controlled import save_controlled
from .errors import ConfigError, ParameterError, RoughMildError, SolverFailure
from .experiments import COLUMNS as EXPERIMENT_COLUMNS
from .experiments import failed_aggregates, run_experiment
from .export import CHECK_COLUMNS, check_rows, write_csv, write_rows_to_excel
from .models import Grid
from .presets import Preset, get_preset
from .report_engine import verify_report
from .rpde_solver import linear_closed_form, solve_global
from .semigroup import build_semigroup, make_generator
from .stochastic_drivers import load_driver, sample_driver
from .verification import run_verify_suites

logger = logging.getLogger("roughmild")

LOG_LEVEL_ENV = "ROUGHMILD_LOG_LEVEL"
MIN_SEEDS = 10

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

WINDOW_COLUMNS = ("window_start", "window_end", "iterations", "final_residual")
SUMMARY_COLUMNS = ("preset", "seed", "steps", "mild_residual", "strong_residual", "apriori_sup",
                   "windows", "wall_time", "closed_form_relative_error")


class UsageError(RoughMildError):
    pass


def configure_logging(verbose: bool = False):
    level = logging.DEBUG if verbose else logging.INFO
    override = os.environ.get(LOG_LEVEL_ENV, "").strip().upper()
    if override:
        level = getattr(logging, override, level)
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughmild",
        description="Rough-path calculus and mild solutions of semilinear rough PDEs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="Base seed (overrides [run] seed)")
    common.add_argument("--out", help="Output directory (overrides [run] out)")
    common.add_argument("--reproducible", action="store_true",
                        help="Suppress timestamps so identical runs give identical files")
    common.add_argument("--xlsx", help="Also write the rows to this workbook")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", parents=[common], help="Run the structural check suites")
    verify.add_argument("--suites", help="Comma-separated suite names (overrides [verify] suites)")
    verify.add_argument("--html", help="Also write an HTML summary to this path")

    solve = sub.add_parser("solve", parents=[common], help="Solve one preset scenario")
    solve.add_argument("--preset", help="Preset name (overrides [solver] preset)")
    solve.add_argument("--steps", type=int, help="Grid steps N (overrides [grid] steps)")
    solve.add_argument("--size", type=int, help="State dimension m for heat presets")

    mc = sub.add_parser("montecarlo", parents=[common], help="Run a Monte Carlo experiment")
    mc.add_argument("--experiment", choices=EXPERIMENTS, help="Experiment (overrides [montecarlo])")
    mc.add_argument("--n-seeds", type=int, help="Number of seeds (overrides [montecarlo] n_seeds)")
    mc.add_argument("--workers", type=int, help="Worker threads (still capped by ROUGHMILD_THREADS)")
    return parser


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    run = config.run
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if args.out is not None:
        run = replace(run, out=args.out)
    if args.reproducible:
        run = replace(run, reproducible=True)
    config = replace(config, run=run)

    if args.command == "verify" and args.suites is not None:
        names = tuple(s.strip() for s in args.suites.split(",") if s.strip())
        unknown = [s for s in names if s not in ALL_SUITES]
        if unknown:
            raise UsageError(f"unknown suite(s) {', '.join(unknown)}")
        config = replace(config, verify=replace(config.verify, suites=names))
    if args.command == "solve":
        if args.preset is not None:
            config = replace(config, solver=replace(config.solver, preset=args.preset))
        if args.size is not None:
            config = replace(config, solver=replace(config.solver, size=args.size))
        if args.steps is not None:
            if args.steps < 1:
                raise UsageError("--steps must be positive")
            config = replace(config, grid=replace(config.grid, steps=args.steps))
    if args.command == "montecarlo":
        mc = config.montecarlo
        if args.experiment is not None:
            mc = replace(mc, experiment=args.experiment)
        if args.n_seeds is not None:
            mc = replace(mc, n_seeds=args.n_seeds)
        if mc.n_seeds < MIN_SEEDS:
            raise UsageError(f"n_seeds must be at least {MIN_SEEDS}, got {mc.n_seeds}")
        config = replace(config, montecarlo=mc)
    return config


def load_run_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    return _apply_overrides(config, args)


# ─────────────────────────────────────────────────────────────────────────────
# Commands
# ─────────────────────────────────────────────────────────────────────────────


def run_verify(config: RunConfig, xlsx: Optional[str] = None, html_path: Optional[str] = None) -> int:
    out = Path(config.run.out)
    suites = run_verify_suites(config)
    sheets = {}
    for name, results in suites.items():
        rows = check_rows(results)
        write_csv(out / f"verify_{name}.csv", CHECK_COLUMNS, rows,
                  config.config_hash, config.run.reproducible)
        sheets[name] = (CHECK_COLUMNS, rows)
    if xlsx:
        write_rows_to_excel(sheets, xlsx)
    if html_path:
        verify_report(suites, config.config_hash, dated=not config.run.reproducible).generate(html_path)
        logger.info("wrote %s", html_path)

    failed = [(name, r) for name, results in suites.items() for r in results if not r.passed]
    for name, result in failed:
        logger.error("%s: %s [%s] lhs=%.6g rhs=%.6g", name, result.check_id,
                     result.instance_id, result.lhs, result.rhs)
    total = sum(len(results) for results in suites.values())
    logger.info("verify: %d checks in %d suites, %d failed", total, len(suites), len(failed))
    return EXIT_FAILED if failed else EXIT_OK


def generator_for(config: RunConfig, preset: Preset) -> np.ndarray:
    """The preset's A unless [semigroup] names another generator of the same size."""
    sg = config.semigroup
    if sg.generator == "preset":
        return preset.a_matrix
    return make_generator(sg.generator, preset.field.m, sg.spacing, sg.diagonal,
                          sg.coupling, sg.matrix_file)


def run_solve(config: RunConfig, xlsx: Optional[str] = None) -> int:
    solver = config.solver
    preset = get_preset(solver.preset, **solver.preset_params())
    grid = Grid(config.grid.horizon, config.grid.steps)
    seed = config.run.seed
    if config.driver.file:
        driver, _ = load_driver(config.driver.file)
        grid = driver.rough.grid
        logger.info("driver loaded from %s (%s, N=%d)", config.driver.file, driver.kind, grid.n_steps)
    else:
        kind = config.driver.kind or preset.driver_kind
        driver = sample_driver(kind, preset.spectrum, grid, seed, preset.hurst,
                               config.driver.fine_factor, config.driver.alpha)
    table = build_semigroup(generator_for(config, preset), grid)

    started = time.perf_counter()
    report = solve_global(table, preset.field, preset.xi, driver.rough, solver.solve)
    wall_time = time.perf_counter() - started

    out = Path(config.run.out)
    out.mkdir(parents=True, exist_ok=True)
    save_controlled(report.solution, out / "solution.txt",
                    {"preset": preset.name, "seed": seed, "config_hash": config.config_hash})
    logger.info("wrote %s", out / "solution.txt")

    window_rows = [
        {"window_start": i, "window_end": j, "iterations": len(history),
         "final_residual": float(history[-1]) if history else None}
        for (i, j), history in zip(report.windows, report.picard_residuals)
    ]
    write_csv(out / "windows.csv", WINDOW_COLUMNS, window_rows,
              config.config_hash, config.run.reproducible)

    summary = {
        "preset": preset.name,
        "seed": seed,
        "steps": grid.n_steps,
        "mild_residual": report.mild_residual,
        "strong_residual": report.strong_residual,
        "apriori_sup": report.apriori_sup,
        "windows": len(report.windows),
        "wall_time": None if config.run.reproducible else wall_time,
    }
    if preset.name == "linear_scalar_geometric":
        exact = linear_closed_form(float(preset.xi[0]), driver.rough)
        summary["closed_form_relative_error"] = float(
            abs(report.solution.y.values[-1, 0] - exact[-1]) / abs(exact[-1]))
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, [summary],
              config.config_hash, config.run.reproducible)
    if xlsx:
        write_rows_to_excel({"windows": (WINDOW_COLUMNS, window_rows),
                             "summary": (SUMMARY_COLUMNS, [summary])}, xlsx)
    logger.info("solve %s: %d windows, mild residual %.3e", preset.name,
                len(report.windows), report.mild_residual)
    return EXIT_OK


def run_montecarlo(config: RunConfig, xlsx: Optional[str] = None,
                   max_workers: Optional[int] = None) -> int:
    experiment = config.montecarlo.experiment

    def progress(percent: int, message: str):
        logger.debug("%s %3d%% %s", experiment, percent, message)

    rows = run_experiment(config, progress=progress, max_workers=max_workers)
    out = Path(config.run.out)
    write_csv(out / f"{experiment}.csv", EXPERIMENT_COLUMNS, rows,
              config.config_hash, config.run.reproducible)
    if xlsx:
        write_rows_to_excel({experiment: (EXPERIMENT_COLUMNS, rows)}, xlsx)
    failed = failed_aggregates(rows)
    for row in failed:
        logger.error("%s: aggregate %s = %.6g missed target %s", experiment, row["metric"],
                     row["value"], row["target"])
    return EXIT_FAILED if failed else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        config = load_run_config(args)
        logger.info("config %s (hash %s)", config.source or "<defaults>", config.config_hash)
        if args.command == "verify":
            return run_verify(config, args.xlsx, args.html)
        if args.command == "solve":
            return run_solve(config, args.xlsx)
        return run_montecarlo(config, args.xlsx, args.workers)
    except (ConfigError, ParameterError, UsageError) as exc:
        logger.error("%s", exc)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SolverFailure as exc:
        logger.error("solver failure on window %s: %s", exc.window, exc)
        logger.error("residual history: %s", ", ".join(f"{r:.3e}" for r in exc.history) or "empty")
        return EXIT_SOLVER
    except (RoughMildError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_USAGE


def entry_point(argv: Optional[List[str]] = None):
    sys.exit(main(argv))
