"""Main entry point for mtcov."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from dotenv import load_dotenv
from pydantic import ValidationError

from .commands import Command, build_run_config, run_command
from .core.exceptions import (
    BacktestError,
    ConfigurationError,
    DegenerateColumnError,
    DimensionError,
    FdpUnavailableError,
    ParseError,
    SingularCovarianceError,
)
from .utils.logging import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIGURATION = 2
EXIT_PROCEDURE = 3

_CONFIGURATION_ERRORS = (
    ConfigurationError,
    ParseError,
    DimensionError,
    DegenerateColumnError,
    ValidationError,
)
_PROCEDURE_ERRORS = (FdpUnavailableError, SingularCovarianceError)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--seed", type=int, help="Root seed")
    parser.add_argument("--workers", type=int, help="Thread cap, defaults to all cores")
    parser.add_argument("--out", dest="output_dir", type=Path, help="Output directory")
    parser.add_argument("--alpha", type=float, help="Significance level")
    parser.add_argument("-B", "--replications", type=int, help="Monte Carlo draws B")
    parser.add_argument("--epsilon", type=float, help="Eigenvalue floor of the regularized matrix")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-file", type=Path, help="Also write the log to this file")
    parser.add_argument(
        "--record-timing",
        action="store_true",
        default=None,
        help="Write wall time into JSON reports",
    )


def _add_testing(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("input", type=Path, help="Returns CSV with a date column")
    parser.add_argument("--criterion", choices=["kfwer", "fdp", "unadjusted"])
    parser.add_argument("--k", help="k of the k-FWER: an integer, log or sqrt")
    parser.add_argument("--gamma", type=float, help="FDP tolerance")
    parser.add_argument("--mode", choices=["ss", "sd"], help="Single-step or step-down")
    parser.add_argument("--fdp-search", choices=["sequential", "bisection"])
    parser.add_argument("--centering", choices=["sample_mean", "known"])
    parser.add_argument("--null-dump", type=Path, help="Null distribution file to reuse or create")
    parser.add_argument(
        "--single-precision",
        action="store_true",
        default=None,
        help="Store the null distribution as 4-byte reals",
    )


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="mtcov",
        description="Covariance regularization by Monte Carlo multiple testing of correlations",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    adjust = commands.add_parser(Command.ADJUST_PVALUES.value, help="Adjusted p-values of all correlations")
    _add_common(adjust)
    _add_testing(adjust)

    regularize = commands.add_parser(Command.REGULARIZE.value, help="Regularized covariance matrix")
    _add_common(regularize)
    _add_testing(regularize)
    regularize.add_argument("--rule", choices=["mt", "bps_a", "bps_b"], help="Thresholding rule")

    simulate = commands.add_parser(Command.SIMULATE.value, help="Monte Carlo error rates and power")
    _add_common(simulate)
    simulate.add_argument("--N", dest="N_list", type=int, nargs="+", help="Numbers of assets")
    simulate.add_argument("--T", dest="T_list", type=int, nargs="+", help="Sample sizes")
    simulate.add_argument("--delta", type=float, nargs="+", help="Sparsity levels")
    simulate.add_argument("--innovation", nargs="+", help="normal or tNU, e.g. t6")
    simulate.add_argument("--procedures", nargs="+", help="e.g. ss sd sd:k=sqrt ss:fdp=0.1 bps:b")
    simulate.add_argument("-R", "--outer-replications", dest="R", type=int, help="Replications per cell")

    backtest = commands.add_parser(Command.BACKTEST.value, help="Rolling GMV backtest")
    _add_common(backtest)
    backtest.add_argument("input", type=Path, help="Returns CSV with a date column")
    backtest.add_argument("--strategies", nargs="+", help="e.g. sample ls ew vt bps:b sd ss:fdp=0.1")
    backtest.add_argument("-L", "--window", dest="L", type=int, help="Estimation window length")
    backtest.add_argument("--holding", type=int, help="Days between rebalances")
    backtest.add_argument("--kappa", type=float, help="Proportional transaction cost")
    backtest.add_argument(
        "--no-short-sales",
        dest="short_sales",
        action="store_false",
        default=None,
        help="Constrain weights to be non-negative",
    )
    backtest.add_argument(
        "--on-fdp-failure", choices=["raise", "no_rejections"], help="What an FDP failure does"
    )
    return parser


_SETTINGS_FLAGS = (
    "seed",
    "workers",
    "output_dir",
    "alpha",
    "replications",
    "epsilon",
    "log_level",
    "log_file",
    "record_timing",
    "criterion",
    "k",
    "gamma",
    "mode",
    "fdp_search",
    "centering",
    "null_dump",
    "single_precision",
    "rule",
)
_SECTION_FLAGS = (
    "N_list",
    "T_list",
    "delta",
    "innovation",
    "procedures",
    "R",
    "strategies",
    "L",
    "holding",
    "kappa",
    "short_sales",
    "on_fdp_failure",
)


def _given(args: argparse.Namespace, names: tuple[str, ...]) -> dict[str, Any]:
    return {n: v for n in names if (v := getattr(args, n, None)) is not None}


def exit_code(error: BaseException) -> int:
    """Exit status for an error raised by a command."""
    if isinstance(error, BacktestError):
        return exit_code(error.cause)
    if isinstance(error, _CONFIGURATION_ERRORS):
        return EXIT_CONFIGURATION
    if isinstance(error, _PROCEDURE_ERRORS):
        return EXIT_PROCEDURE
    return EXIT_UNEXPECTED


def main(argv: list[str] | None = None) -> int:
    """Main entry point for the CLI."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level or "INFO", log_file=args.log_file)

    logger.info(f"Starting mtcov {args.command}")
    try:
        run = build_run_config(
            args.command,
            input_path=getattr(args, "input", None),
            config_file=args.config,
            overrides=_given(args, _SETTINGS_FLAGS),
            section_overrides=_given(args, _SECTION_FLAGS),
        )
        setup_logging(level=run.settings.log_level, log_file=run.settings.log_file)
        outputs = run_command(run)
        for name, path in outputs.items():
            logger.debug(f"{name}: {path}")
        logger.info(f"{args.command} completed successfully")
        return EXIT_OK

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_UNEXPECTED
    except Exception as e:
        code = exit_code(e)
        if code == EXIT_UNEXPECTED:
            logger.error(f"Fatal error: {e}", exc_info=True)
        else:
            logger.error(f"{type(e).__name__}: {e}")
        return code


if __name__ == "__main__":
    sys.exit(main())
