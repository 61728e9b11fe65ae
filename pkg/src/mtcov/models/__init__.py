"""Data models for mtcov."""

from .backtest import BacktestConfig, BacktestReport
from .covariance import BpsUniversalRule, FChoice, MultipleTestingRule, RegularizedCovariance
from .panel import CenteredPanel, Centering, HalfVec, MatrixKind, ReturnsPanel, SymmetricMatrix
from .simulation import DgpSpec, ExperimentResult, Innovation, SimulationGrid
from .strategy import StrategyKind, StrategySpec, parse_strategy
from .testing import AdjustedPValues, NullDistribution, ResamplingPlan, TestSpec

__all__ = [
    "AdjustedPValues",
    "BacktestConfig",
    "BacktestReport",
    "BpsUniversalRule",
    "CenteredPanel",
    "Centering",
    "DgpSpec",
    "ExperimentResult",
    "FChoice",
    "HalfVec",
    "Innovation",
    "MatrixKind",
    "MultipleTestingRule",
    "NullDistribution",
    "RegularizedCovariance",
    "ResamplingPlan",
    "ReturnsPanel",
    "SimulationGrid",
    "StrategyKind",
    "StrategySpec",
    "SymmetricMatrix",
    "TestSpec",
    "parse_strategy",
]
