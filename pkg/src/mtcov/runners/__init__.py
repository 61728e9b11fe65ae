"""Simulation and backtest runners."""

from .backtest import Backtester, run_backtest, run_backtests
from .simlab import SimulationLab, run_error_rate_experiment

__all__ = ["Backtester", "SimulationLab", "run_backtest", "run_backtests", "run_error_rate_experiment"]
