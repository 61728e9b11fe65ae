"""Subcommand implementations behind the ``mtcov`` CLI.

Each command reads its inputs, runs one module and writes deterministic
output files into ``settings.output_dir``. Wall time is logged and only
written into reports when ``record_timing`` is set.
"""

import logging
import re
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np

from .core.config import Settings, load_config_file
from .core.constants import SIMULATION_COLUMNS
from .core.exceptions import ConfigurationError
from .core.mtest import adjust, pvalue_matrix
from .core.panel import center, correlation_about_origin, vechs
from .core.regularizer import regularize
from .models.backtest import BacktestConfig, BacktestReport
from .models.covariance import BpsUniversalRule, FChoice, MultipleTestingRule, ThresholdRule
from .models.panel import CenteredPanel, HalfVec
from .models.simulation import SimulationGrid
from .models.testing import AdjustedPValues, ResamplingPlan, TestSpec
from .runners.backtest import run_backtests
from .runners.simlab import SimulationLab
from .utils.csv_handler import (
    read_returns_csv,
    write_frame_csv,
    write_matrix_csv,
    write_series_csv,
    write_table_csv,
)
from .utils.json_report import pvalue_report, write_json
from .utils.logging import log_timing
from .utils.null_dump import cached_null

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["strategy", "AV", "SD", "IR", "TO", "MDD", "TW", "fdp_failures"]

# Flags shared with the simulate and backtest sections, mapped to their keys there
_SHARED_KEYS = {"seed": "seed", "alpha": "alpha", "replications": "B", "epsilon": "epsilon"}


class Command(StrEnum):
    ADJUST_PVALUES = "adjust-pvalues"
    REGULARIZE = "regularize"
    SIMULATE = "simulate"
    BACKTEST = "backtest"


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs, after merging all sources."""

    command: Command
    settings: Settings
    input_path: Path | None = None
    grid: SimulationGrid | None = None
    backtests: tuple[BacktestConfig, ...] = field(default_factory=tuple)

    @property
    def output_dir(self) -> Path:
        return self.settings.output_dir


def _shared(settings: Settings) -> dict[str, Any]:
    return {target: getattr(settings, name) for name, target in _SHARED_KEYS.items()}


def _backtest_configs(
    settings: Settings, section: dict[str, Any], overrides: dict[str, Any]
) -> tuple[BacktestConfig, ...]:
    values = {**_shared(settings), **section, **overrides}
    strategies = values.pop("strategies", None) or [values.pop("strategy", "sd")]
    values.pop("strategy", None)
    if isinstance(strategies, str):
        strategies = [strategies]
    return tuple(BacktestConfig(**values, strategy=s) for s in strategies)


def build_run_config(
    command: Command | str,
    input_path: Path | None = None,
    config_file: Path | None = None,
    overrides: dict[str, Any] | None = None,
    section_overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Merge flags, config file, environment and defaults in that order.

    Flat keys of the config file go to ``Settings``; the ``[simulate]`` and
    ``[backtest]`` tables configure those commands. Shared flags such as
    ``--seed`` also override the section values.

    Args:
        command: Subcommand name.
        input_path: Returns CSV for the panel commands.
        config_file: Optional TOML config file.
        overrides: Settings given on the command line.
        section_overrides: Command-specific flags, keyed like the section.

    Returns:
        Validated run configuration.

    Raises:
        ConfigurationError: If the sources disagree with the command.
        pydantic.ValidationError: If a value violates a field constraint.
    """
    command = Command(command)
    overrides = overrides or {}
    section_overrides = section_overrides or {}
    file_values = load_config_file(config_file) if config_file is not None else {}
    sections = {
        name: file_values.pop(name)
        for name in ("simulate", "backtest")
        if isinstance(file_values.get(name), dict)
    }

    settings = Settings(**{**file_values, **overrides})
    shared_flags = {_SHARED_KEYS[k]: v for k, v in overrides.items() if k in _SHARED_KEYS}

    if command in (Command.ADJUST_PVALUES, Command.REGULARIZE, Command.BACKTEST) and input_path is None:
        raise ConfigurationError(f"{command} needs an input returns CSV")

    grid = None
    backtests: tuple[BacktestConfig, ...] = ()
    if command is Command.SIMULATE:
        grid = SimulationGrid.model_validate(
            {**_shared(settings), **sections.get("simulate", {}), **shared_flags, **section_overrides}
        )
    elif command is Command.BACKTEST:
        backtests = _backtest_configs(
            settings, sections.get("backtest", {}), {**shared_flags, **section_overrides}
        )
    elif command is Command.ADJUST_PVALUES or settings.rule == "mt":
        settings.test_spec()

    return RunConfig(
        command=command,
        settings=settings,
        input_path=input_path,
        grid=grid,
        backtests=backtests,
    )


def _load_centered(run: RunConfig) -> CenteredPanel:
    if run.input_path is None:
        raise ConfigurationError(f"{run.command} needs an input returns CSV")
    return center(read_returns_csv(run.input_path), run.settings.centering)


def _test_pvalues(panel: CenteredPanel, settings: Settings, spec: TestSpec) -> AdjustedPValues:
    plan = ResamplingPlan(
        replications=spec.replications,
        seed=spec.seed,
        workers=settings.workers,
        single_precision=settings.single_precision,
    )
    null = cached_null(panel, plan, settings.null_dump)
    observed = HalfVec(np.abs(vechs(correlation_about_origin(panel)).values))
    return adjust(observed, null, spec)


def _with_timing(payload: dict[str, Any], settings: Settings, seconds: float) -> dict[str, Any]:
    if settings.record_timing:
        payload["wall_seconds"] = seconds
    return payload


def _file_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def adjust_pvalues_cmd(run: RunConfig) -> dict[str, Path]:
    """Write adjusted p-values as JSON and as an N x N matrix with zero diagonal.

    Raises:
        FdpUnavailableError: If the FDP procedure cannot produce p-values.
    """
    settings = run.settings
    settings.ensure_directories()
    panel = _load_centered(run)
    spec = settings.test_spec()

    with log_timing(f"adjust-pvalues {spec.label}", logger) as timing:
        pvalues = _test_pvalues(panel, settings, spec)

    logger.info(f"{spec.label}: {pvalues.n_rejected} of {pvalues.m} correlations significant")
    outputs = {
        "report": run.output_dir / "pvalues.json",
        "matrix": run.output_dir / "pvalue_matrix.csv",
    }
    write_json(
        _with_timing(pvalue_report(pvalues, panel.asset_ids), settings, timing["seconds"]),
        outputs["report"],
    )
    write_matrix_csv(pvalue_matrix(pvalues), panel.asset_ids, outputs["matrix"])
    return outputs


def threshold_rule(panel: CenteredPanel, settings: Settings) -> tuple[ThresholdRule, dict[str, Any]]:
    """Thresholding rule selected by ``settings.rule`` and its description."""
    if settings.rule == "mt":
        spec = settings.test_spec()
        pvalues = _test_pvalues(panel, settings, spec)
        return MultipleTestingRule(pvalues, settings.alpha), {
            "rule": spec.label,
            "n_rejected": pvalues.n_rejected,
            "replications": spec.replications,
            "seed": spec.seed,
        }
    f_choice = FChoice.NSQUARED if settings.rule == "bps_a" else FChoice.BONFERRONI
    rule = BpsUniversalRule(f_choice=f_choice, alpha=settings.alpha)
    return rule, {"rule": "BPS_a" if f_choice is FChoice.NSQUARED else "BPS_b"}


def regularize_cmd(run: RunConfig) -> dict[str, Path]:
    """Write the regularized covariance and correlation matrices plus a JSON sidecar."""
    settings = run.settings
    settings.ensure_directories()
    panel = _load_centered(run)

    with log_timing("regularize", logger) as timing:
        rule, description = threshold_rule(panel, settings)
        result = regularize(panel, rule, settings.epsilon)

    outputs = {
        "covariance": run.output_dir / "covariance.csv",
        "correlation": run.output_dir / "correlation.csv",
        "report": run.output_dir / "regularize.json",
    }
    write_matrix_csv(result.covariance, panel.asset_ids, outputs["covariance"])
    write_matrix_csv(result.correlation, panel.asset_ids, outputs["correlation"])
    payload = {
        **description,
        **result.summary(),
        "alpha": settings.alpha,
        "epsilon": settings.epsilon,
        "centering": settings.centering.value,
        "n_obs": panel.n_obs,
    }
    write_json(_with_timing(payload, settings, timing["seconds"]), outputs["report"])
    return outputs


def simulate_cmd(run: RunConfig) -> dict[str, Path]:
    """Run the simulation grid and write one tidy row per cell and procedure."""
    if run.grid is None:
        raise ConfigurationError("simulate needs a simulation grid")
    settings = run.settings
    settings.ensure_directories()

    with log_timing("simulate", logger) as timing:
        results = SimulationLab(run.grid, workers=settings.workers).run()

    outputs = {
        "table": run.output_dir / "simulation.csv",
        "report": run.output_dir / "simulation.json",
    }
    write_table_csv([row for r in results for row in r.rows()], SIMULATION_COLUMNS, outputs["table"])
    payload = {
        "grid": run.grid.model_dump(mode="json"),
        "critical_values": [
            {
                "N": r.spec.n_assets,
                "T": r.spec.n_obs,
                "delta": r.spec.delta,
                "innovation": r.spec.innovation.label,
                **r.critical_values,
            }
            for r in results
            if r.critical_values
        ],
    }
    write_json(_with_timing(payload, settings, timing["seconds"]), outputs["report"])
    return outputs


def _write_report_series(report: BacktestReport, out: Path) -> dict[str, Path]:
    name = _file_label(report.strategy)
    paths = {
        f"wealth_{name}": out / f"wealth_{name}.csv",
        f"weights_{name}": out / f"weights_{name}.csv",
    }
    write_series_csv(report.wealth, paths[f"wealth_{name}"])
    write_frame_csv(report.weights_history, paths[f"weights_{name}"])
    if report.significant_proportion is not None:
        paths[f"significant_{name}"] = out / f"significant_proportion_{name}.csv"
        write_series_csv(report.significant_proportion, paths[f"significant_{name}"])
    return paths


def backtest_cmd(run: RunConfig) -> dict[str, Path]:
    """Backtest every configured strategy and write summary, JSON and series files."""
    if not run.backtests:
        raise ConfigurationError("backtest needs at least one strategy")
    if run.input_path is None:
        raise ConfigurationError("backtest needs an input returns CSV")
    settings = run.settings
    settings.ensure_directories()
    panel = read_returns_csv(run.input_path)

    with log_timing("backtest", logger) as timing:
        reports = run_backtests(panel, run.backtests, workers=settings.workers)

    outputs = {
        "summary": run.output_dir / "backtest_summary.csv",
        "report": run.output_dir / "backtest.json",
    }
    summary = [{k: v for k, v in r.to_dict().items() if k in SUMMARY_COLUMNS} for r in reports]
    write_table_csv(summary, SUMMARY_COLUMNS, outputs["summary"])
    payload = {
        "config": run.backtests[0].model_dump(mode="json", exclude={"strategy"}),
        "reports": [r.to_dict() for r in reports],
    }
    write_json(_with_timing(payload, settings, timing["seconds"]), outputs["report"])
    for report in reports:
        outputs.update(_write_report_series(report, run.output_dir))
    return outputs


COMMANDS = {
    Command.ADJUST_PVALUES: adjust_pvalues_cmd,
    Command.REGULARIZE: regularize_cmd,
    Command.SIMULATE: simulate_cmd,
    Command.BACKTEST: backtest_cmd,
}


def run_command(run: RunConfig) -> dict[str, Path]:
    """Dispatch to the subcommand named in ``run``."""
    return COMMANDS[run.command](run)
