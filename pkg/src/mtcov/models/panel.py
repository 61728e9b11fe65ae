"""Return panels and symmetric matrix containers."""

import math
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from ..core.exceptions import DimensionError, NumericalError


def _frozen(array: np.ndarray) -> np.ndarray:
    """Return a read-only float copy of an array."""
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ReturnsPanel:
    """T x N panel of asset returns with time and asset labels."""

    observations: np.ndarray
    asset_ids: tuple[str, ...]
    timestamps: tuple[str, ...]

    def __post_init__(self) -> None:
        values = _frozen(self.observations)
        if values.ndim != 2:
            raise DimensionError(f"Returns must be a 2-D array, got {values.ndim} dimensions")
        n_obs, n_assets = values.shape
        if n_assets < 2:
            raise DimensionError(f"At least 2 assets are required, got {n_assets}")
        if n_obs < 2:
            raise DimensionError(f"At least 2 observations are required, got {n_obs}")
        if not np.all(np.isfinite(values)):
            raise DimensionError("Returns contain non-finite entries")
        if len(self.asset_ids) != n_assets:
            raise DimensionError(f"{len(self.asset_ids)} asset ids for {n_assets} columns")
        if len(self.timestamps) != n_obs:
            raise DimensionError(f"{len(self.timestamps)} timestamps for {n_obs} rows")
        if any(a >= b for a, b in zip(self.timestamps, self.timestamps[1:], strict=False)):
            raise DimensionError("Timestamps must be strictly increasing")

        object.__setattr__(self, "observations", values)
        object.__setattr__(self, "asset_ids", tuple(str(a) for a in self.asset_ids))
        object.__setattr__(self, "timestamps", tuple(self.timestamps))

    @property
    def n_obs(self) -> int:
        return self.observations.shape[0]

    @property
    def n_assets(self) -> int:
        return self.observations.shape[1]

    def rows(self, start: int, stop: int) -> "ReturnsPanel":
        """Sub-panel of rows start..stop-1."""
        return ReturnsPanel(
            observations=self.observations[start:stop],
            asset_ids=self.asset_ids,
            timestamps=self.timestamps[start:stop],
        )


class Centering(StrEnum):
    """How the location vector is obtained."""

    KNOWN_LOCATION = "known"
    SAMPLE_MEAN = "sample_mean"


@dataclass(frozen=True)
class CenteredPanel:
    """Centered returns y_t = r_t - mu and the location that was removed."""

    values: np.ndarray
    centering: Centering
    location: np.ndarray
    asset_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape[1] < 2 or values.shape[0] < 1:
            raise DimensionError(f"Centered values must be T x N with N >= 2, got {values.shape}")
        location = _frozen(self.location)
        if location.shape != (values.shape[1],):
            raise DimensionError(
                f"Location has length {location.size}, expected {values.shape[1]}"
            )
        if len(self.asset_ids) != values.shape[1]:
            raise DimensionError(f"{len(self.asset_ids)} asset ids for {values.shape[1]} columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "location", location)
        object.__setattr__(self, "asset_ids", tuple(self.asset_ids))

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    @property
    def second_moments(self) -> np.ndarray:
        """Variances about the origin, T^-1 sum_t y_it^2."""
        return np.mean(self.values**2, axis=0)


class MatrixKind(StrEnum):
    CORRELATION = "correlation"
    COVARIANCE = "covariance"


@dataclass(frozen=True)
class SymmetricMatrix:
    """Dense symmetric N x N matrix built from its upper triangle.

    Only the upper triangle of ``entries`` is read, so the stored matrix is
    symmetric by construction.
    """

    entries: np.ndarray
    kind: MatrixKind

    def __post_init__(self) -> None:
        raw = np.asarray(self.entries, dtype=float)
        if raw.ndim != 2 or raw.shape[0] != raw.shape[1] or raw.shape[0] < 1:
            raise DimensionError(f"Expected a square matrix, got shape {raw.shape}")
        upper = np.triu(raw)
        dense = upper + np.triu(raw, 1).T
        diagonal = np.diag(dense)

        if self.kind is MatrixKind.CORRELATION:
            if not np.all(diagonal == 1.0):
                raise NumericalError("Correlation matrix diagonal must be exactly 1")
            off = dense[~np.eye(dense.shape[0], dtype=bool)]
            if off.size and np.max(np.abs(off)) > 1.0:
                raise NumericalError("Correlation entries must lie in [-1, 1]")
        elif np.any(diagonal < 0):
            raise NumericalError("Covariance diagonal must be non-negative")

        object.__setattr__(self, "entries", _frozen(dense))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def to_numpy(self) -> np.ndarray:
        """Writable copy of the dense matrix."""
        return np.array(self.entries, copy=True)


@dataclass(frozen=True)
class HalfVec:
    """Strict half-vectorization (2,1),...,(N,1),(3,2),...,(N,N-1)."""

    values: np.ndarray
    n_assets: int = field(init=False)

    def __post_init__(self) -> None:
        values = _frozen(np.ravel(self.values))
        m = values.size
        n = (1 + math.isqrt(1 + 8 * m)) // 2
        if m < 1 or n * (n - 1) // 2 != m:
            raise DimensionError(f"Length {m} is not of the form N(N-1)/2 with N >= 2")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "n_assets", n)

    @property
    def m(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size
