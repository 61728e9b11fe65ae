"""Exception hierarchy for mtcov.

None of these derive from ValueError so they pass through pydantic
validators untouched.
"""


class MtcovError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MtcovError):
    """Invalid run or test configuration."""


class ParseError(MtcovError):
    """Malformed input file."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None) -> None:
        self.row = row
        self.column = column
        location = ""
        if row is not None or column is not None:
            location = f" (row {row}, column {column!r})"
        super().__init__(f"{message}{location}")


class DimensionError(MtcovError):
    """Array shapes or lengths do not agree."""


class DegenerateColumnError(MtcovError):
    """An asset column has zero second moment."""

    def __init__(self, asset_id: str) -> None:
        self.asset_id = asset_id
        super().__init__(f"Asset {asset_id!r} has zero variance about the origin")


class NumericalError(MtcovError):
    """A numerical result violated a tolerance it must respect."""


class ConstructionError(MtcovError):
    """A simulation input could not be constructed."""


class SingularCovarianceError(MtcovError):
    """Covariance matrix is not positive definite."""


class FdpUnavailableError(MtcovError):
    """The FDP stopping rule fired at k = 1 with gamma > 0."""

    def __init__(self, rejections: int, gamma: float) -> None:
        self.rejections = rejections
        self.gamma = gamma
        super().__init__(
            f"FDP-adjusted p-values cannot be produced: 1 > gamma * (R_1 + 1) "
            f"with R_1={rejections}, gamma={gamma}"
        )


class WealthError(MtcovError):
    """A gross return wiped out a position."""


class BacktestError(MtcovError):
    """A covariance strategy failed at a formation date."""

    def __init__(self, formation_index: int, cause: Exception) -> None:
        self.formation_index = formation_index
        self.cause = cause
        super().__init__(f"Strategy failed at formation index {formation_index}: {cause}")
