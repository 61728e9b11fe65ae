"""Data-generating processes, procedures and experiment results."""

import re
from dataclasses import dataclass, field
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..core.constants import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILON,
    DEFAULT_GARCH,
    DEFAULT_REPLICATIONS,
    DEFAULT_SEED,
    DEFAULT_SIM_REPLICATIONS,
)
from ..core.exceptions import ConfigurationError
from .covariance import FChoice
from .testing import TestSpec

_STUDENT = re.compile(r"^t(?:_|:)?(\d+(?:\.\d+)?)$")


class Innovation(BaseModel):
    """Distribution of the standardized shocks z_t."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["normal", "student_t"] = "normal"
    df: float | None = None

    @model_validator(mode="after")
    def check_df(self) -> "Innovation":
        if self.kind == "student_t" and (self.df is None or self.df <= 2):
            raise ConfigurationError(
                f"Student t innovations need more than 2 degrees of freedom, got {self.df}"
            )
        return self

    @classmethod
    def parse(cls, text: str) -> "Innovation":
        """Parse ``normal`` or ``t6`` style labels."""
        text = text.strip().lower()
        if text in ("normal", "gaussian"):
            return cls()
        match = _STUDENT.match(text)
        if match is None:
            raise ConfigurationError(f"Unknown innovation distribution {text!r}")
        return cls(kind="student_t", df=float(match.group(1)))

    @property
    def label(self) -> str:
        return "normal" if self.kind == "normal" else f"t{self.df:g}"


class DgpSpec(BaseModel):
    """CCC-GARCH(1,1) design for one simulation cell."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n_assets: int = Field(..., ge=2, alias="N")
    n_obs: int = Field(..., ge=2, alias="T")
    delta: float = Field(0.0, ge=0.0, le=1.0)
    innovation: Innovation = Field(default_factory=Innovation)
    garch: tuple[float, float, float] = DEFAULT_GARCH
    dgp_seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)

    @field_validator("innovation", mode="before")
    @classmethod
    def parse_innovation(cls, v: Any) -> Any:
        return Innovation.parse(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def check_garch(self) -> "DgpSpec":
        omega, arch, persistence = self.garch
        if omega <= 0 or arch < 0 or persistence < 0:
            raise ConfigurationError(f"GARCH parameters must be positive, got {self.garch}")
        if arch + persistence >= 1:
            raise ConfigurationError(
                f"GARCH is not covariance stationary: {arch} + {persistence} >= 1"
            )
        return self

    @property
    def unconditional_variance(self) -> float:
        omega, arch, persistence = self.garch
        return omega / (1.0 - arch - persistence)

    @property
    def m(self) -> int:
        return self.n_assets * (self.n_assets - 1) // 2


class BpsProcedure(BaseModel):
    """Universal-threshold test, optionally with a simulated critical value."""

    model_config = ConfigDict(frozen=True)

    f_choice: FChoice = FChoice.BONFERRONI
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0)
    size_adjusted: bool = False

    @property
    def label(self) -> str:
        suffix = "a" if self.f_choice is FChoice.NSQUARED else "b"
        return f"BPS_{suffix}" + ("_adj" if self.size_adjusted else "")


Procedure = TestSpec | BpsProcedure


@dataclass(frozen=True)
class ProcedureOutcome:
    """Monte Carlo rates and losses of one procedure in one cell.

    ``average_power`` is None when the design has no false hypotheses.
    """

    label: str
    error_rate: float
    error_rate_stderr: float
    average_power: float | None
    average_power_stderr: float | None
    frobenius_loss_mean: float
    fdp_failures: int = 0


@dataclass(frozen=True)
class ExperimentResult:
    """All procedure outcomes for one DGP cell."""

    spec: DgpSpec
    replications: int
    outcomes: tuple[ProcedureOutcome, ...]
    sample_frobenius_loss_mean: float
    critical_values: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigurationError("An experiment needs at least one replication")

    def outcome(self, label: str) -> ProcedureOutcome:
        for outcome in self.outcomes:
            if outcome.label == label:
                return outcome
        raise KeyError(label)

    def rows(self) -> list[dict[str, Any]]:
        """One tidy row per procedure."""
        return [
            {
                "N": self.spec.n_assets,
                "T": self.spec.n_obs,
                "delta": self.spec.delta,
                "innovation": self.spec.innovation.label,
                "procedure": o.label,
                "replications": self.replications,
                "error_rate": o.error_rate,
                "error_rate_stderr": o.error_rate_stderr,
                "average_power": o.average_power,
                "average_power_stderr": o.average_power_stderr,
                "frobenius_loss_mean": o.frobenius_loss_mean,
                "sample_frobenius_loss_mean": self.sample_frobenius_loss_mean,
                "fdp_failures": o.fdp_failures,
            }
            for o in self.outcomes
        ]


def _as_list(v: Any) -> Any:
    return [v] if isinstance(v, (int, float, str)) else v


class SimulationGrid(BaseModel):
    """Experiment grid read from a config file.

    Cells are the Cartesian product of ``N_list``, ``T_list``, ``delta`` and
    ``innovation``; every cell runs all ``procedures``.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    n_list: list[int] = Field(default_factory=lambda: [25], alias="N_list")
    t_list: list[int] = Field(default_factory=lambda: [63], alias="T_list")
    deltas: list[float] = Field(default_factory=lambda: [0.0], alias="delta")
    innovations: list[Innovation] = Field(
        default_factory=lambda: [Innovation()], alias="innovation"
    )
    procedures: list[str] = Field(default_factory=lambda: ["ss", "sd", "bps:a", "bps:b"])
    replications: int = Field(DEFAULT_SIM_REPLICATIONS, ge=1, alias="R")
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    test_replications: int = Field(DEFAULT_REPLICATIONS, ge=2, alias="B")
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0.0, le=0.5)
    calibration_replications: int | None = Field(None, ge=1)
    garch: tuple[float, float, float] = DEFAULT_GARCH

    @field_validator("n_list", "t_list", "deltas", mode="before")
    @classmethod
    def parse_scalar(cls, v: Any) -> Any:
        return _as_list(v)

    @field_validator("innovations", mode="before")
    @classmethod
    def parse_innovations(cls, v: Any) -> Any:
        return [Innovation.parse(i) if isinstance(i, str) else i for i in _as_list(v)]

    def cells(self) -> list[DgpSpec]:
        return [
            DgpSpec(
                n_assets=n,
                n_obs=t,
                delta=delta,
                innovation=innovation,
                garch=self.garch,
                dgp_seed=self.seed,
            )
            for n in self.n_list
            for t in self.t_list
            for delta in self.deltas
            for innovation in self.innovations
        ]
