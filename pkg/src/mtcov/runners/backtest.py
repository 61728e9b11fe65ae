"""Rolling-window GMV backtests with turnover, costs and wealth tracking."""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
import pandas as pd
from scipy import linalg

from ..core.constants import (
    KKT_TOLERANCE,
    REPLICATION_STREAM,
    TRADING_DAYS,
    WEIGHT_CLAMP,
)
from ..core.exceptions import (
    BacktestError,
    ConfigurationError,
    DegenerateColumnError,
    DimensionError,
    MtcovError,
    NumericalError,
    SingularCovarianceError,
    WealthError,
)
from ..core.panel import center
from ..core.resampler import derived_seed
from ..models.backtest import BacktestConfig, BacktestReport
from ..models.panel import CenteredPanel, ReturnsPanel, SymmetricMatrix
from ..models.strategy import StrategyKind
from .strategies import estimate_covariance

logger = logging.getLogger(__name__)


def _solve(covariance: np.ndarray) -> np.ndarray:
    """Sigma^-1 iota by Cholesky; singular matrices are an error."""
    try:
        factor = linalg.cho_factor(covariance, lower=True)
    except linalg.LinAlgError as e:
        raise SingularCovarianceError(
            "Covariance matrix is singular or not positive definite; "
            "use a regularized estimator when N approaches L"
        ) from e
    return linalg.cho_solve(factor, np.ones(covariance.shape[0]))


def _budget_weights(covariance: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-variance weights summing to one and the budget multiplier."""
    direction = _solve(covariance)
    total = direction.sum()
    return direction / total, 1.0 / total


def _active_set(
    covariance: np.ndarray, start: np.ndarray, max_iterations: int
) -> np.ndarray:
    """Primal active-set method for min w'Sw subject to 1'w = 1, w >= 0."""
    n = covariance.shape[0]
    weights = start.copy()
    bound = weights <= 0.0
    weights[bound] = 0.0

    for _ in range(max_iterations):
        free = np.flatnonzero(~bound)
        target = np.zeros(n)
        target[free], budget = _budget_weights(covariance[np.ix_(free, free)])
        step = target - weights

        if np.max(np.abs(step)) <= KKT_TOLERANCE:
            multipliers = covariance @ target - budget
            released = np.flatnonzero(bound & (multipliers < -KKT_TOLERANCE))
            if released.size == 0:
                return target
            bound[released[np.argmin(multipliers[released])]] = False
            weights = target
            continue

        blocking = np.flatnonzero(~bound & (step < 0))
        ratios = weights[blocking] / -step[blocking]
        length = 1.0
        if ratios.size and ratios.min() < 1.0:
            length = float(ratios.min())
            bound[blocking[np.argmin(ratios)]] = True
        weights = weights + length * step
        weights[bound] = 0.0

    raise NumericalError(f"Active-set solver did not converge in {max_iterations} iterations")


def gmv_weights(
    covariance: SymmetricMatrix,
    short_sales: bool,
    warm_start: np.ndarray | None = None,
) -> np.ndarray:
    """Global minimum variance weights.

    Args:
        covariance: Positive definite covariance matrix.
        short_sales: Allow negative weights.
        warm_start: Feasible weights to start the constrained solver from.

    Returns:
        Weights summing to one, non-negative when short sales are barred.

    Raises:
        SingularCovarianceError: If the covariance matrix is not positive definite.
    """
    sigma = covariance.entries
    n = covariance.dim
    if short_sales:
        weights, _ = _budget_weights(sigma)
        return weights

    start = np.full(n, 1.0 / n)
    if warm_start is not None and warm_start.shape == (n,) and np.all(warm_start >= 0):
        start = warm_start / warm_start.sum()
    _solve(sigma)

    weights = _active_set(sigma, start, max_iterations=10 * n + 100)
    weights[weights < WEIGHT_CLAMP] = 0.0
    return weights / weights.sum()


def drifted_weights(previous: np.ndarray, returns_since: np.ndarray) -> np.ndarray:
    """Buy-and-hold weights after compounding the returns since formation.

    Raises:
        WealthError: If any gross return is not positive.
    """
    gross = 1.0 + np.atleast_2d(np.asarray(returns_since, dtype=float))
    if np.any(gross <= 0.0):
        raise WealthError("A gross return of zero or less wiped out a position")
    holdings = previous * np.prod(gross, axis=0)
    total = holdings.sum()
    if total <= 0.0:
        raise WealthError("Portfolio value dropped to zero or below")
    return holdings / total


def turnover(new_weights: np.ndarray, drifted: np.ndarray) -> float:
    """L1 distance between target and drifted weights."""
    if new_weights.shape != drifted.shape:
        raise DimensionError(f"Weight vectors of shape {new_weights.shape} and {drifted.shape}")
    return float(np.abs(new_weights - drifted).sum())


def wealth_step(
    wealth: float,
    weights: np.ndarray,
    next_returns: np.ndarray,
    is_rebalance: bool,
    traded: float,
    kappa: float,
) -> float:
    """Wealth after one day, net of the rebalancing cost kappa * TO.

    ``traded`` is the turnover at a rebalance and is ignored otherwise.
    """
    grown = wealth * (1.0 + float(weights @ next_returns))
    return grown * (1.0 - kappa * traded) if is_rebalance else grown


def max_drawdown(wealth: Sequence[float] | np.ndarray) -> float:
    """Largest peak-to-trough decline in percent."""
    path = np.asarray(wealth, dtype=float)
    if path.size == 0:
        return 0.0
    peaks = np.maximum.accumulate(path)
    return float(np.max((peaks - path) / peaks) * 100.0)


def baseline_weights(
    kind: Literal[StrategyKind.EQUAL_WEIGHT, StrategyKind.VOLATILITY_TIMING],
    window: CenteredPanel,
) -> np.ndarray:
    """Equal weights, or weights proportional to inverse window variances.

    Raises:
        DegenerateColumnError: If an asset has zero variance in the window.
    """
    n = window.n_assets
    if kind is StrategyKind.EQUAL_WEIGHT:
        return np.full(n, 1.0 / n)
    variances = window.second_moments
    zero = np.flatnonzero(variances <= 0.0)
    if zero.size:
        raise DegenerateColumnError(window.asset_ids[zero[0]])
    precision = 1.0 / variances
    return precision / precision.sum()


def _annualized(net: np.ndarray) -> tuple[float, float, float | None]:
    av = float(net.mean() * TRADING_DAYS * 100.0) if net.size else 0.0
    sd = float(net.std(ddof=1) * math.sqrt(TRADING_DAYS) * 100.0) if net.size > 1 else 0.0
    return av, sd, (av / sd if sd > 0.0 else None)


class Backtester:
    """Runs one strategy through the rebalancing calendar of a panel."""

    def __init__(self, config: BacktestConfig, workers: int | None = None) -> None:
        """Initialize the backtester.

        Args:
            config: Backtest configuration.
            workers: Thread cap for null distributions inside the strategy.
        """
        self.config = config
        self.workers = workers
        self.strategy = config.strategy

    def _target(
        self, panel: ReturnsPanel, t_b: int, previous: np.ndarray | None
    ) -> tuple[np.ndarray, float | None, bool]:
        cfg = self.config
        window = center(panel.rows(t_b - cfg.window + 1, t_b + 1))
        if self.strategy.kind in (StrategyKind.EQUAL_WEIGHT, StrategyKind.VOLATILITY_TIMING):
            return baseline_weights(self.strategy.kind, window), None, False

        estimate = estimate_covariance(
            self.strategy,
            window,
            alpha=cfg.alpha,
            replications=cfg.replications,
            seed=derived_seed(cfg.seed, REPLICATION_STREAM, t_b),
            epsilon=cfg.epsilon,
            workers=self.workers,
            on_fdp_failure=cfg.on_fdp_failure,
        )
        weights = gmv_weights(estimate.covariance, cfg.short_sales, warm_start=previous)
        return weights, estimate.significant_proportion, estimate.fdp_failed

    def run(self, panel: ReturnsPanel) -> BacktestReport:
        """Form, hold and rebalance the portfolio over the whole panel.

        Raises:
            ConfigurationError: If the panel is too short for one holding period.
            BacktestError: If the strategy fails at a formation date.
            WealthError: If a position is wiped out.
        """
        cfg = self.config
        start = cfg.start
        required = start + 1 + cfg.holding
        if panel.n_obs <= required:
            raise ConfigurationError(
                f"Panel has {panel.n_obs} rows; need more than {required} "
                f"for L={cfg.window}, holding={cfg.holding}"
            )

        returns = panel.observations
        formations = list(range(start, panel.n_obs - 1, cfg.holding))
        logger.info(
            f"Backtesting {self.strategy.label}: {len(formations)} formations, "
            f"{panel.n_obs - 1 - start} out-of-sample days"
        )

        wealth = [1.0]
        net: list[float] = []
        turnovers: list[float] = []
        history: list[np.ndarray] = []
        proportions: list[float | None] = []
        failures = 0
        rebalance_days = set(formations)
        held = np.empty(0)
        formed_at = start

        for t in range(start, panel.n_obs - 1):
            rebalance = t in rebalance_days
            cost_turnover = 0.0
            if rebalance:
                previous = held if history else None
                try:
                    target, proportion, failed = self._target(panel, t, previous)
                except MtcovError as e:
                    raise BacktestError(t, e) from e
                if previous is not None:
                    drifted = drifted_weights(previous, returns[formed_at + 1 : t + 1])
                    cost_turnover = turnover(target, drifted)
                    turnovers.append(cost_turnover)
                held, formed_at = target, t
                history.append(target)
                proportions.append(proportion)
                failures += failed
                current = target
            else:
                current = drifted_weights(held, returns[formed_at + 1 : t + 1])

            after = wealth_step(
                wealth[-1], current, returns[t + 1], rebalance, cost_turnover, cfg.kappa
            )
            if after <= 0.0:
                raise WealthError(f"Wealth fell to {after:.6g} at row {t + 1}")
            net.append((after - wealth[-1]) / wealth[-1])
            wealth.append(after)

        net_returns = np.asarray(net)
        av, sd, ir = _annualized(net_returns)
        timestamps = panel.timestamps
        formation_index = [timestamps[t] for t in formations]
        proportion_series = None
        if self.strategy.kind in (StrategyKind.BPS, StrategyKind.MULTIPLE_TESTING):
            proportion_series = pd.Series(
                proportions, index=formation_index, name="significant_proportion", dtype=float
            )

        report = BacktestReport(
            strategy=self.strategy.label,
            av=av,
            sd=sd,
            ir=ir,
            to=float(np.mean(turnovers)) if turnovers else 0.0,
            mdd=max_drawdown(wealth),
            tw=wealth[-1],
            net_returns=pd.Series(
                net_returns, index=list(timestamps[start + 1 :]), name="net_return"
            ),
            wealth=pd.Series(wealth, index=list(timestamps[start:]), name="wealth"),
            turnover=pd.Series([0.0, *turnovers], index=formation_index, name="turnover"),
            weights_history=pd.DataFrame(
                np.vstack(history), index=formation_index, columns=list(panel.asset_ids)
            ),
            significant_proportion=proportion_series,
            fdp_failures=failures,
        )
        logger.info(
            f"{report.strategy}: AV={av:.2f}%, SD={sd:.2f}%, TO={report.to:.4f}, "
            f"MDD={report.mdd:.2f}%, TW={report.tw:.4f}"
        )
        return report


def run_backtest(
    panel: ReturnsPanel, cfg: BacktestConfig, workers: int | None = None
) -> BacktestReport:
    """Backtest one strategy; see ``Backtester.run``."""
    return Backtester(cfg, workers).run(panel)


def run_backtests(
    panel: ReturnsPanel,
    configs: Sequence[BacktestConfig],
    workers: int | None = None,
) -> list[BacktestReport]:
    """Backtest several strategies in parallel over one panel, in config order."""
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda cfg: run_backtest(panel, cfg, workers=1), configs))
