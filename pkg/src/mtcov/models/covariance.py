"""Thresholding rules and regularized covariance estimates."""

from dataclasses import dataclass
from enum import StrEnum
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core.constants import DEFAULT_ALPHA
from ..core.exceptions import ConfigurationError
from .panel import SymmetricMatrix
from .testing import AdjustedPValues


class FChoice(StrEnum):
    """Multiplicity scaling f(N) in the universal threshold."""

    NSQUARED = "n_squared"
    BONFERRONI = "bonferroni"

    def scale(self, n_assets: int) -> int:
        if self is FChoice.NSQUARED:
            return n_assets * n_assets
        return n_assets * (n_assets - 1) // 2


class BpsUniversalRule(BaseModel):
    """Keep rho_ij when |rho_ij| > c / sqrt(T).

    ``critical_value`` overrides the normal quantile, which is how a
    size-adjusted threshold is plugged in.
    """

    model_config = ConfigDict(frozen=True)

    variant: Literal["bps"] = "bps"
    f_choice: FChoice = FChoice.BONFERRONI
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0)
    critical_value: float | None = Field(None, gt=0.0)


@dataclass(frozen=True)
class MultipleTestingRule:
    """Keep rho_ij when its adjusted p-value is at most alpha."""

    pvalues: AdjustedPValues
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")


ThresholdRule = MultipleTestingRule | BpsUniversalRule


@dataclass(frozen=True)
class RegularizedCovariance:
    """Thresholded, shrunk correlation and the covariance assembled from it."""

    correlation: SymmetricMatrix
    covariance: SymmetricMatrix
    sparsity_mask: np.ndarray
    xi_star: float
    lambda_min_before: float
    lambda_min_after: float
    theta_star: float

    def __post_init__(self) -> None:
        mask = np.array(self.sparsity_mask, dtype=bool, copy=True)
        mask.setflags(write=False)
        object.__setattr__(self, "sparsity_mask", mask)

    @property
    def mask_density(self) -> float:
        """Share of off-diagonal correlations that survived thresholding."""
        return float(self.sparsity_mask.mean()) if self.sparsity_mask.size else 0.0

    def summary(self) -> dict[str, Any]:
        return {
            "xi_star": self.xi_star,
            "theta_star": self.theta_star,
            "lambda_min_before": self.lambda_min_before,
            "lambda_min_after": self.lambda_min_after,
            "mask_density": self.mask_density,
            "n_assets": self.correlation.dim,
        }
