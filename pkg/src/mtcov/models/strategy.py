"""Covariance strategy selectors and their spec-string parser."""

from enum import StrEnum
from typing import Literal

from pydantic import BaseModel, ConfigDict

from ..core.constants import DEFAULT_ALPHA
from ..core.exceptions import ConfigurationError
from .covariance import BpsUniversalRule, FChoice
from .testing import Fdp, FdpSearch, KFwer, StepMode, TestSpec


class StrategyKind(StrEnum):
    SAMPLE = "sample"
    LEDOIT_WOLF = "ls"
    EQUAL_WEIGHT = "ew"
    VOLATILITY_TIMING = "vt"
    BPS = "bps"
    MULTIPLE_TESTING = "mt"


_BPS_VARIANTS = {"a": FChoice.NSQUARED, "b": FChoice.BONFERRONI}


class StrategySpec(BaseModel):
    """One covariance strategy, as selected by a spec string."""

    model_config = ConfigDict(frozen=True)

    kind: StrategyKind
    f_choice: FChoice | None = None
    size_adjusted: bool = False
    mode: StepMode | None = None
    k: int | Literal["log", "sqrt"] | None = None
    gamma: float | None = None
    fdp_search: FdpSearch = FdpSearch.SEQUENTIAL

    @property
    def is_multiple_testing(self) -> bool:
        return self.kind is StrategyKind.MULTIPLE_TESTING

    @property
    def label(self) -> str:
        match self.kind:
            case StrategyKind.BPS:
                suffix = "a" if self.f_choice is FChoice.NSQUARED else "b"
                return f"BPS_{suffix}" + ("_adj" if self.size_adjusted else "")
            case StrategyKind.MULTIPLE_TESTING:
                base = str(self.mode).upper()
                if self.gamma is not None:
                    return f"{base}_fdp={self.gamma:g}"
                return base if self.k in (None, 1) else f"{base}_k={self.k}"
            case StrategyKind.SAMPLE:
                return "Sample"
            case _:
                return self.kind.value.upper()

    def test_spec(
        self, alpha: float, replications: int, seed: int
    ) -> TestSpec:
        """TestSpec for a multiple-testing strategy.

        Raises:
            ConfigurationError: If the strategy is not a multiple-testing one.
        """
        if not self.is_multiple_testing or self.mode is None:
            raise ConfigurationError(f"Strategy {self.label} does not run multiple tests")
        criterion = Fdp(gamma=self.gamma) if self.gamma is not None else KFwer(k=self.k or 1)
        return TestSpec(
            criterion=criterion,
            mode=self.mode,
            alpha=alpha,
            replications=replications,
            seed=seed,
            fdp_search=self.fdp_search,
        )

    def bps_rule(
        self, alpha: float = DEFAULT_ALPHA, critical_value: float | None = None
    ) -> BpsUniversalRule:
        if self.kind is not StrategyKind.BPS or self.f_choice is None:
            raise ConfigurationError(f"Strategy {self.label} is not a universal threshold")
        return BpsUniversalRule(
            f_choice=self.f_choice, alpha=alpha, critical_value=critical_value
        )


def _parse_option(option: str, text: str) -> dict[str, object]:
    key, sep, value = option.partition("=")
    if not sep or not value:
        raise ConfigurationError(f"Malformed option {option!r} in strategy {text!r}")
    if key == "k":
        if value in ("log", "sqrt"):
            return {"k": value}
        if value.isdigit() and int(value) >= 1:
            return {"k": int(value)}
        raise ConfigurationError(f"k must be a positive integer, 'log' or 'sqrt', got {value!r}")
    if key == "fdp":
        try:
            gamma = float(value)
        except ValueError as e:
            raise ConfigurationError(f"Invalid FDP threshold {value!r}") from e
        if not 0.0 <= gamma < 1.0:
            raise ConfigurationError(f"FDP threshold must lie in [0, 1), got {gamma}")
        return {"gamma": gamma}
    raise ConfigurationError(f"Unknown option {key!r} in strategy {text!r}")


def parse_strategy(text: str) -> StrategySpec:
    """Parse strings like ``sd:k=sqrt``, ``ss:fdp=0.1@bisection`` or ``bps:b``.

    Raises:
        ConfigurationError: If the string does not name a known strategy.
    """
    base, _, search = text.strip().lower().partition("@")
    head, *options = base.split(":")

    fdp_search = FdpSearch.SEQUENTIAL
    if search:
        try:
            fdp_search = FdpSearch(search)
        except ValueError as e:
            raise ConfigurationError(f"Unknown FDP search {search!r}") from e

    simple = {k.value: k for k in StrategyKind if k not in (StrategyKind.BPS, StrategyKind.MULTIPLE_TESTING)}
    if head in simple:
        if options or search:
            raise ConfigurationError(f"Strategy {head!r} takes no options")
        return StrategySpec(kind=simple[head])

    if head == "bps":
        if not options or options[0] not in _BPS_VARIANTS or len(options) > 2:
            raise ConfigurationError(f"Expected bps:a or bps:b, got {text!r}")
        if len(options) == 2 and options[1] != "size_adjusted":
            raise ConfigurationError(f"Unknown BPS option {options[1]!r}")
        return StrategySpec(
            kind=StrategyKind.BPS,
            f_choice=_BPS_VARIANTS[options[0]],
            size_adjusted=len(options) == 2,
        )

    if head in ("ss", "sd"):
        if len(options) > 1:
            raise ConfigurationError(f"Too many options in strategy {text!r}")
        fields = _parse_option(options[0], text) if options else {}
        if search and "gamma" not in fields:
            raise ConfigurationError(f"Search suffix only applies to FDP strategies: {text!r}")
        return StrategySpec(
            kind=StrategyKind.MULTIPLE_TESTING,
            mode=StepMode(head),
            fdp_search=fdp_search,
            **fields,
        )

    raise ConfigurationError(f"Unknown strategy {text!r}")
