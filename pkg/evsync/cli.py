#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Command-line interface for evsync.

This module provides the main command-line interface, using argparse to parse
arguments and subcommands.
"""

import argparse
import itertools
import logging
import sys
import traceback
from typing import List, Optional

from evsync import __version__
from evsync.config import (
    MODES,
    PRESET_ALIASES,
    RunConfig,
    load_config,
    load_preset,
    preset_names,
)
from evsync.core.errors import ConfigError
from evsync.core.experiment import ExperimentResult
from evsync.core.utils import percentage
from evsync.experiments import EXPERIMENT_REGISTRY, experiment_for
from evsync.noises import NOISE_REGISTRY
from evsync.syncctl import TriggerParams

# Configure logging
logger = logging.getLogger("evsync")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def setup_logging(verbose: bool = False, debug: bool = False) -> None:
    """
    Set up logging configuration.

    Args:
        verbose: Whether to enable verbose logging (INFO level)
        debug: Whether to enable debug logging (DEBUG level)
    """
    if debug:
        log_level = logging.DEBUG
    elif verbose:
        log_level = logging.INFO
    else:
        log_level = logging.ERROR

    log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    logging.basicConfig(level=log_level, format=log_format)


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", metavar="PATH", help="JSON run configuration")
    source.add_argument("--preset", metavar="NAME", help="Bundled preset (see 'list')")
    parser.add_argument("--trials", type=int, help="Number of Monte Carlo trials")
    parser.add_argument("--horizon", type=int, help="Steps per trial")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--mode", choices=MODES, help="Transmission mode or sync-only")
    parser.add_argument("--workers", type=int, help="Worker processes (default: all CPUs)")
    parser.add_argument("--out", metavar="DIR", help="Output directory")
    parser.add_argument(
        "--allow-complex", action="store_true", default=None,
        help="Accept complex eigenvalues of A - KCA",
    )


def create_parser() -> argparse.ArgumentParser:
    """
    Create the command-line argument parser.

    Returns:
        Configured argument parser
    """
    parser = argparse.ArgumentParser(
        prog="evsync",
        description="evsync - event-triggered synchronization and distributed Kalman filtering",
    )
    parser.add_argument("--version", action="version", version=f"evsync {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Enable verbose logging (INFO level)"
    )
    parser.add_argument(
        "-X", "--debug", action="store_true", help="Enable debug logging (DEBUG level)"
    )

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    subparsers.add_parser("list", help="List presets, experiments and noise kinds")

    design_parser = subparsers.add_parser(
        "design", help="Run the design pipeline and print the certificate"
    )
    _add_run_options(design_parser)

    run_parser = subparsers.add_parser("run", help="Design and run the Monte Carlo experiment")
    _add_run_options(run_parser)

    sweep_parser = subparsers.add_parser(
        "sweep", help="Communication/accuracy trade-off over a grid of trigger settings"
    )
    _add_run_options(sweep_parser)
    sweep_parser.add_argument("--c0", type=float, nargs="+", required=True, help="c0 values")
    sweep_parser.add_argument("--c1", type=float, nargs="+", help="c1 values (default: config)")
    sweep_parser.add_argument("--rho", type=float, nargs="+", help="rho values (default: config)")

    return parser


def resolve_config(parsed: argparse.Namespace) -> RunConfig:
    """Load the config named on the command line and apply the overrides."""
    config = load_config(parsed.config) if parsed.config else load_preset(parsed.preset)
    return config.with_overrides(
        trials=parsed.trials,
        horizon=parsed.horizon,
        seed=parsed.seed,
        mode=parsed.mode,
        workers=parsed.workers,
        out=parsed.out,
        allow_complex=parsed.allow_complex,
    )


def run(config: RunConfig, out_dir: Optional[str] = None,
        design_only: bool = False) -> ExperimentResult:
    """
    Execute the design pipeline and, unless ``design_only``, the experiment.

    Args:
        config: validated configuration
        out_dir: artifact directory; None writes nothing
        design_only: stop after the design phase

    Returns:
        ExperimentResult; ``result.exit_code`` is the process exit code
    """
    experiment = experiment_for(config)
    return experiment.run(out_dir=out_dir, design_only=design_only)


def print_result(result: ExperimentResult) -> None:
    if result.success:
        for line in result.report:
            print(line)
        for path in result.artifacts:
            print(f"  wrote {path}")
    else:
        print(f"{result.experiment} failed: {result.error}", file=sys.stderr)


def list_available() -> None:
    print("Presets:")
    for name in preset_names():
        print(f"  {name}")
    for alias, target in sorted(PRESET_ALIASES.items()):
        print(f"  {alias} (same as {target})")
    print("\nExperiments:")
    for name, cls in sorted(EXPERIMENT_REGISTRY.items()):
        print(f"  {name:<20} {cls.__doc__.strip().splitlines()[0]}")
    print("\nNoise kinds:")
    for name, cls in sorted(NOISE_REGISTRY.items()):
        print(f"  {name:<20} {cls.__doc__.strip().splitlines()[0]}")


def run_sweep(config: RunConfig, parsed: argparse.Namespace) -> int:
    if config.sync_only:
        logger.error("sweep needs an estimation config")
        return EXIT_CONFIG
    c1s = parsed.c1 or [config.trigger.c1]
    rhos = parsed.rho or [config.trigger.rho]
    try:
        grid = [TriggerParams(c0, c1, rho) for c0, c1, rho in itertools.product(parsed.c0, c1s, rhos)]
    except ValueError as e:
        logger.error(f"Invalid trigger grid: {e}")
        return EXIT_CONFIG

    experiment = EXPERIMENT_REGISTRY["estimation"](config)
    try:
        table = experiment.sweep(grid, out_dir=config.output.dir)
    except Exception as e:
        logger.error(f"Sweep failed: {e}")
        logger.debug("Exception details:", exc_info=True)
        return EXIT_FAILED

    print(f"{'c0':>8} {'c1':>8} {'rho':>6} {'rate':>8} {'loss':>8}")
    for row in table:
        print(
            f"{row['c0']:>8g} {row['c1']:>8g} {row['rho']:>6g} "
            f"{percentage(row['comm_rate']):>8} {percentage(row['perf_loss']):>8}"
        )
    return EXIT_OK


def main(args: Optional[List[str]] = None) -> int:
    """
    Main entry point for the application.

    Args:
        args: Command-line arguments (if None, use sys.argv)

    Returns:
        Exit code (0 for success, 1 for a failed run, 2 for a configuration error)
    """
    if args is None:
        args = sys.argv[1:]

    parser = create_parser()
    if len(args) == 0:
        parser.print_help()
        return EXIT_OK

    parsed_args = parser.parse_args(args)
    setup_logging(parsed_args.verbose, parsed_args.debug)

    if parsed_args.command == "list":
        list_available()
        return EXIT_OK

    try:
        config = resolve_config(parsed_args)
    except ConfigError as e:
        logger.debug(traceback.format_exc())
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if parsed_args.command == "sweep":
        return run_sweep(config, parsed_args)

    design_only = parsed_args.command == "design"
    out_dir = None if design_only else config.output.dir
    result = run(config, out_dir=out_dir, design_only=design_only)
    print_result(result)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
