"""Backtest configuration and performance reports."""

from dataclasses import dataclass
from typing import Any, Literal

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..core.constants import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILON,
    DEFAULT_HOLDING,
    DEFAULT_KAPPA,
    DEFAULT_REPLICATIONS,
    DEFAULT_SEED,
    DEFAULT_WINDOW,
)
from ..core.exceptions import ConfigurationError
from .strategy import StrategySpec, parse_strategy


class BacktestConfig(BaseModel):
    """Rolling-window GMV backtest of one covariance strategy."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    window: int = Field(DEFAULT_WINDOW, ge=2, alias="L", description="Estimation window L")
    holding: int = Field(DEFAULT_HOLDING, ge=1, description="Days between rebalances")
    kappa: float = Field(DEFAULT_KAPPA, ge=0.0, lt=1.0, description="Proportional cost")
    short_sales: bool = True
    strategy: StrategySpec = Field(default_factory=lambda: parse_strategy("sd"))
    initial_index: int | None = Field(
        None, ge=0, description="Row of the first formation, defaults to L - 1"
    )

    # Estimator settings
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0)
    replications: int = Field(DEFAULT_REPLICATIONS, ge=2, alias="B")
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0.0, le=0.5)
    on_fdp_failure: Literal["raise", "no_rejections"] = "raise"

    @field_validator("strategy", mode="before")
    @classmethod
    def parse_strategy_string(cls, v: Any) -> Any:
        """Accept strategy spec strings such as ``sd:k=sqrt``."""
        return parse_strategy(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def check_start(self) -> "BacktestConfig":
        if self.initial_index is not None and self.initial_index < self.window - 1:
            raise ConfigurationError(
                f"First formation row {self.initial_index} leaves fewer than L={self.window} rows"
            )
        if self.strategy.is_multiple_testing:
            self.strategy.test_spec(self.alpha, self.replications, self.seed)
        if self.strategy.size_adjusted:
            raise ConfigurationError(
                f"{self.strategy.label} is calibrated on a simulated null and is only "
                "available to the simulation lab; use the plain BPS variant"
            )
        return self

    @property
    def start(self) -> int:
        return self.window - 1 if self.initial_index is None else self.initial_index


@dataclass(frozen=True)
class BacktestReport:
    """Out-of-sample performance of one strategy.

    AV, SD and MDD are in percent; IR is None when SD is zero.
    """

    strategy: str
    av: float
    sd: float
    ir: float | None
    to: float
    mdd: float
    tw: float
    net_returns: pd.Series
    wealth: pd.Series
    turnover: pd.Series
    weights_history: pd.DataFrame
    significant_proportion: pd.Series | None = None
    fdp_failures: int = 0

    @property
    def formation_timestamps(self) -> list[str]:
        return [str(t) for t in self.weights_history.index]

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready summary with the per-rebalance series."""
        proportion = None
        if self.significant_proportion is not None:
            proportion = [float(p) for p in self.significant_proportion]
        return {
            "strategy": self.strategy,
            "AV": self.av,
            "SD": self.sd,
            "IR": self.ir,
            "TO": self.to,
            "MDD": self.mdd,
            "TW": self.tw,
            "n_returns": int(self.net_returns.size),
            "n_rebalances": int(self.weights_history.shape[0]),
            "formation_timestamps": self.formation_timestamps,
            "turnover": [float(t) for t in self.turnover],
            "significant_proportion": proportion,
            "fdp_failures": self.fdp_failures,
        }
