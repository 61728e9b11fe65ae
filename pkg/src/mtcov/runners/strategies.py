"""Covariance estimators selectable by a backtest strategy."""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.covariance import ledoit_wolf

from ..core.exceptions import ConfigurationError, FdpUnavailableError
from ..core.mtest import adjust
from ..core.panel import correlation_about_origin, vechs
from ..core.regularizer import assemble_covariance, regularize
from ..core.resampler import generate_null
from ..models.covariance import MultipleTestingRule
from ..models.panel import CenteredPanel, HalfVec, MatrixKind, SymmetricMatrix
from ..models.strategy import StrategyKind, StrategySpec
from ..models.testing import AdjustedPValues, ResamplingPlan

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CovarianceEstimate:
    """Covariance matrix plus the share of correlations kept, if any."""

    covariance: SymmetricMatrix
    significant_proportion: float | None = None
    fdp_failed: bool = False


def sample_covariance(panel: CenteredPanel) -> SymmetricMatrix:
    """Second moments about the origin of the centered window."""
    return assemble_covariance(panel, correlation_about_origin(panel))


def linear_shrinkage(panel: CenteredPanel) -> SymmetricMatrix:
    """Sample covariance shrunk toward a scaled identity."""
    covariance, shrinkage = ledoit_wolf(panel.values, assume_centered=True)
    logger.debug(f"Linear shrinkage intensity {shrinkage:.4f}")
    return SymmetricMatrix(covariance, MatrixKind.COVARIANCE)


def estimate_covariance(
    strategy: StrategySpec,
    panel: CenteredPanel,
    *,
    alpha: float,
    replications: int,
    seed: int,
    epsilon: float,
    workers: int | None = None,
    on_fdp_failure: str = "raise",
) -> CovarianceEstimate:
    """Estimate the window covariance matrix the strategy calls for.

    Args:
        strategy: Covariance strategy.
        panel: Centered estimation window.
        alpha: Testing level for thresholding strategies.
        replications: B for multiple-testing strategies.
        seed: Resampling seed for this window.
        epsilon: Eigenvalue floor of the regularized correlation matrix.
        workers: Thread cap for the null distribution.
        on_fdp_failure: ``raise`` or ``no_rejections``.

    Returns:
        Covariance estimate.

    Raises:
        ConfigurationError: If the strategy does not use a covariance matrix.
        FdpUnavailableError: If an FDP strategy fails and failures raise.
    """
    match strategy.kind:
        case StrategyKind.SAMPLE:
            return CovarianceEstimate(sample_covariance(panel))
        case StrategyKind.LEDOIT_WOLF:
            return CovarianceEstimate(linear_shrinkage(panel))
        case StrategyKind.BPS:
            if strategy.size_adjusted:
                raise ConfigurationError(f"{strategy.label} needs a simulated critical value")
            result = regularize(panel, strategy.bps_rule(alpha), epsilon)
            return CovarianceEstimate(result.covariance, result.mask_density)
        case StrategyKind.MULTIPLE_TESTING:
            spec = strategy.test_spec(alpha, replications, seed)
            plan = ResamplingPlan(replications=replications, seed=seed, workers=workers)
            null = generate_null(panel, plan)
            observed = HalfVec(np.abs(vechs(correlation_about_origin(panel)).values))
            try:
                pvalues = adjust(observed, null, spec)
            except FdpUnavailableError as e:
                if on_fdp_failure == "raise":
                    raise
                logger.warning(f"{e}; keeping no correlations")
                pvalues = AdjustedPValues(np.full(observed.m, replications), replications, alpha)
                result = regularize(panel, MultipleTestingRule(pvalues, alpha), epsilon)
                return CovarianceEstimate(result.covariance, 0.0, fdp_failed=True)
            result = regularize(panel, MultipleTestingRule(pvalues, alpha), epsilon)
            return CovarianceEstimate(result.covariance, result.mask_density)
        case _:
            raise ConfigurationError(f"Strategy {strategy.label} does not estimate a covariance matrix")
