"""Resampling plans, test specifications and p-value records."""

import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.constants import (
    DEFAULT_ALPHA,
    DEFAULT_REPLICATIONS,
    DEFAULT_SEED,
    INTEGRALITY_TOLERANCE,
)
from ..core.exceptions import ConfigurationError


class ResamplingPlan(BaseModel):
    """B - 1 sign-flip replications keyed by (seed, replication)."""

    model_config = ConfigDict(frozen=True)

    replications: int = Field(DEFAULT_REPLICATIONS, ge=2, description="B")
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64, description="Root seed")
    workers: int | None = Field(None, ge=1, description="Thread cap, None for all cores")
    single_precision: bool = Field(
        False, description="Store |rho~| as 4-byte reals to halve memory"
    )


@dataclass(frozen=True)
class NullDistribution:
    """|rho~| for B - 1 artificial samples plus B tie-breaking uniforms.

    Row b of ``tilde_rho_abs`` belongs to replication b; ``uniforms[:-1]``
    break ties for the simulated values and ``uniforms[-1]`` for the
    observed one.
    """

    tilde_rho_abs: np.ndarray
    uniforms: np.ndarray

    def __post_init__(self) -> None:
        if self.tilde_rho_abs.ndim != 2:
            raise ConfigurationError("Null distribution must be a (B-1) x M matrix")
        if self.uniforms.shape != (self.tilde_rho_abs.shape[0] + 1,):
            raise ConfigurationError(
                f"Expected {self.tilde_rho_abs.shape[0] + 1} uniforms, got {self.uniforms.size}"
            )
        self.tilde_rho_abs.setflags(write=False)
        self.uniforms.setflags(write=False)

    @property
    def replications(self) -> int:
        """B."""
        return self.uniforms.size

    @property
    def m(self) -> int:
        return self.tilde_rho_abs.shape[1]

    @property
    def u_obs(self) -> float:
        return float(self.uniforms[-1])

    @property
    def u_sim(self) -> np.ndarray:
        return self.uniforms[:-1]


class StepMode(StrEnum):
    SINGLE_STEP = "ss"
    STEP_DOWN = "sd"


class FdpSearch(StrEnum):
    SEQUENTIAL = "sequential"
    BISECTION = "bisection"


class KFwer(BaseModel):
    """Control the probability of k or more false rejections."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["kfwer"] = "kfwer"
    k: int | Literal["log", "sqrt"] = 1

    @model_validator(mode="after")
    def check_k(self) -> "KFwer":
        if isinstance(self.k, int) and self.k < 1:
            raise ConfigurationError(f"k must be a positive integer, got {self.k}")
        return self

    def resolve(self, m: int) -> int:
        """Concrete k for M hypotheses; heuristic rules are floored at 1."""
        if self.k == "log":
            return max(1, math.floor(math.log(m))) if m > 1 else 1
        if self.k == "sqrt":
            return max(1, math.isqrt(m))
        return int(self.k)

    @property
    def label(self) -> str:
        return "" if self.k == 1 else f"_k={self.k}"


class Fdp(BaseModel):
    """Control Pr(FDP > gamma)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["fdp"] = "fdp"
    gamma: float = Field(..., ge=0.0, lt=1.0)

    @property
    def label(self) -> str:
        return f"_fdp={self.gamma:g}"


class Unadjusted(BaseModel):
    """Per-hypothesis Monte Carlo p-values without multiplicity adjustment."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["unadjusted"] = "unadjusted"

    @property
    def label(self) -> str:
        return "_unadjusted"


Criterion = Annotated[KFwer | Fdp | Unadjusted, Field(discriminator="kind")]


class TestSpec(BaseModel):
    """Criterion, mode, level and resampling size of one testing run."""

    __test__ = False  # not a pytest class

    model_config = ConfigDict(frozen=True)

    criterion: Criterion = Field(default_factory=KFwer)
    mode: StepMode = StepMode.STEP_DOWN
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0)
    replications: int = Field(DEFAULT_REPLICATIONS, ge=2, description="B")
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    fdp_search: FdpSearch = FdpSearch.SEQUENTIAL

    @model_validator(mode="after")
    def check_integrality(self) -> "TestSpec":
        product = self.alpha * self.replications
        if abs(product - round(product)) > INTEGRALITY_TOLERANCE or round(product) < 1:
            raise ConfigurationError(
                f"alpha * B must be a positive integer, got {self.alpha} * {self.replications} = {product:g}"
            )
        return self

    @property
    def critical_count(self) -> int:
        """alpha * B as an integer."""
        return round(self.alpha * self.replications)

    @property
    def label(self) -> str:
        return f"{self.mode.value.upper()}{self.criterion.label}"

    def plan(self, workers: int | None = None) -> ResamplingPlan:
        return ResamplingPlan(replications=self.replications, seed=self.seed, workers=workers)


@dataclass(frozen=True)
class AdjustedPValues:
    """Multiplicity-adjusted p-values aligned with vechs order.

    ``numerators`` holds the integers B - R + 1 so that rejection decisions
    avoid floating-point comparisons.
    """

    numerators: np.ndarray
    replications: int
    alpha: float
    spec: TestSpec | None = None
    k: int | None = None
    k_star: int | None = None
    evaluations: int = 1

    def __post_init__(self) -> None:
        numerators = np.array(self.numerators, dtype=np.int64, copy=True)
        if numerators.ndim != 1:
            raise ConfigurationError("p-value numerators must be a vector")
        if numerators.size and (
            numerators.min() < 1 or numerators.max() > self.replications
        ):
            raise ConfigurationError("p-value numerators must lie in 1..B")
        numerators.setflags(write=False)
        object.__setattr__(self, "numerators", numerators)

    @property
    def values(self) -> np.ndarray:
        return self.numerators / self.replications

    @property
    def rejected(self) -> np.ndarray:
        return self.numerators <= math.floor(self.alpha * self.replications + INTEGRALITY_TOLERANCE)

    @property
    def n_rejected(self) -> int:
        return int(self.rejected.sum())

    @property
    def m(self) -> int:
        return self.numerators.size
