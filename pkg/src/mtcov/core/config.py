"""Configuration management using Pydantic Settings."""

import tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..models.panel import Centering
from ..models.testing import (
    Fdp,
    FdpSearch,
    KFwer,
    StepMode,
    TestSpec,
    Unadjusted,
)
from .constants import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILON,
    DEFAULT_FDP_GAMMA,
    DEFAULT_REPLICATIONS,
    DEFAULT_SEED,
)
from .exceptions import ConfigurationError


class Settings(BaseSettings):
    """Run settings with environment variable support.

    Values passed to the constructor win over ``MTCOV_*`` environment
    variables and ``.env`` entries, which win over the defaults below.
    """

    # Randomness and parallelism
    seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64, description="Root seed")
    workers: int | None = Field(
        default=None,
        ge=1,
        description="Thread cap for module-level parallelism, None for all cores",
    )

    # Testing
    alpha: float = Field(default=DEFAULT_ALPHA, gt=0.0, lt=1.0)
    replications: int = Field(
        default=DEFAULT_REPLICATIONS,
        ge=2,
        description="B, the number of Monte Carlo draws including the observed one",
    )
    criterion: Literal["kfwer", "fdp", "unadjusted"] = "kfwer"
    k: int | Literal["log", "sqrt"] = Field(default=1, description="k of the k-FWER")
    gamma: float = Field(default=DEFAULT_FDP_GAMMA, ge=0.0, lt=1.0)
    mode: StepMode = StepMode.STEP_DOWN
    fdp_search: FdpSearch = FdpSearch.SEQUENTIAL
    single_precision: bool = False

    # Regularization
    rule: Literal["mt", "bps_a", "bps_b"] = Field(
        default="mt",
        description="Thresholding rule: multiple testing or a BPS universal threshold",
    )
    epsilon: float = Field(default=DEFAULT_EPSILON, gt=0.0, le=0.5)
    centering: Centering = Centering.SAMPLE_MEAN

    # Output configuration
    output_dir: Path = Field(
        default_factory=lambda: Path.cwd() / "output",
        description="Directory for output files",
    )
    log_level: str = "INFO"
    log_file: Path | None = None
    record_timing: bool = Field(
        default=False,
        description="Write wall-clock time into JSON reports",
    )
    null_dump: Path | None = Field(
        default=None,
        description="Binary null distribution to reuse or create",
    )

    model_config = SettingsConfigDict(
        env_prefix="MTCOV_",
        case_sensitive=False,
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @field_validator("k", mode="before")
    @classmethod
    def parse_k(cls, v: str | int) -> str | int:
        """Accept k as an integer string from the environment."""
        if isinstance(v, str) and v.strip().isdigit():
            return int(v)
        return v

    @field_validator("output_dir", "log_file", "null_dump", mode="before")
    @classmethod
    def parse_path(cls, v: str | Path | None) -> Path | None:
        """Parse path from string."""
        if isinstance(v, str):
            return Path(v)
        return v

    def test_spec(self) -> TestSpec:
        """Assemble the multiple-testing specification.

        Raises:
            ConfigurationError: If alpha * B is not a positive integer.
        """
        match self.criterion:
            case "fdp":
                criterion: KFwer | Fdp | Unadjusted = Fdp(gamma=self.gamma)
            case "unadjusted":
                criterion = Unadjusted()
            case _:
                criterion = KFwer(k=self.k)
        return TestSpec(
            criterion=criterion,
            mode=self.mode,
            alpha=self.alpha,
            replications=self.replications,
            seed=self.seed,
            fdp_search=self.fdp_search,
        )

    def ensure_directories(self) -> None:
        """Ensure all required directories exist."""
        self.output_dir.mkdir(parents=True, exist_ok=True)


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a flat TOML config file into a dict.

    Raises:
        ConfigurationError: If the file is missing or not valid TOML.
    """
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Invalid config file {path}: {e}") from e
