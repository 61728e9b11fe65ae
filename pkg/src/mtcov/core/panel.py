"""Centering, correlations about the origin and half-vectorization."""

import logging
from functools import lru_cache

import numpy as np

from ..models.panel import (
    CenteredPanel,
    Centering,
    HalfVec,
    MatrixKind,
    ReturnsPanel,
    SymmetricMatrix,
)
from .constants import CORRELATION_SLACK
from .exceptions import DegenerateColumnError, DimensionError, NumericalError

logger = logging.getLogger(__name__)


def center(
    panel: ReturnsPanel,
    mode: Centering = Centering.SAMPLE_MEAN,
    location: np.ndarray | None = None,
) -> CenteredPanel:
    """Subtract a location vector from every row of the panel.

    Args:
        panel: Raw returns.
        mode: ``SAMPLE_MEAN`` uses column means, ``KNOWN_LOCATION`` uses
            ``location`` (zeros when omitted).
        location: Known location vector, length N.

    Returns:
        Centered panel.

    Raises:
        DimensionError: If the location length differs from N.
    """
    if panel.n_assets < 2:
        raise DimensionError(f"At least 2 assets are required, got {panel.n_assets}")

    if mode is Centering.SAMPLE_MEAN:
        mu = panel.observations.mean(axis=0)
    else:
        mu = np.zeros(panel.n_assets) if location is None else np.asarray(location, dtype=float)
        if mu.shape != (panel.n_assets,):
            raise DimensionError(
                f"Location vector has length {mu.size}, expected {panel.n_assets}"
            )

    return CenteredPanel(
        values=panel.observations - mu,
        centering=mode,
        location=mu,
        asset_ids=panel.asset_ids,
    )


@lru_cache(maxsize=64)
def vechs_indices(n_assets: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices (i, j), i > j, in strict half-vectorization order."""
    cols, rows = np.triu_indices(n_assets, k=1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def vechs(matrix: SymmetricMatrix) -> HalfVec:
    """Stack the below-diagonal entries column by column."""
    rows, cols = vechs_indices(matrix.dim)
    return HalfVec(matrix.entries[rows, cols])


def fill(v: HalfVec, diagonal: float = 1.0) -> SymmetricMatrix:
    """Inverse of ``vechs``; the diagonal is set to ``diagonal``.

    A diagonal other than 1 yields a covariance-kind container, which is how
    p-value matrices with a zero diagonal are represented.
    """
    n = v.n_assets
    rows, cols = vechs_indices(n)
    dense = np.zeros((n, n))
    dense[rows, cols] = v.values
    dense[cols, rows] = v.values
    np.fill_diagonal(dense, diagonal)
    kind = MatrixKind.CORRELATION if diagonal == 1.0 else MatrixKind.COVARIANCE
    return SymmetricMatrix(dense, kind)


def _scale(values: np.ndarray, asset_ids: tuple[str, ...]) -> np.ndarray:
    """Square roots of the second moments; zero columns are an error."""
    second = np.mean(values**2, axis=0)
    zero = np.flatnonzero(second <= 0.0)
    if zero.size:
        raise DegenerateColumnError(asset_ids[zero[0]])
    return np.sqrt(second)


def _clamp(correlations: np.ndarray) -> np.ndarray:
    worst = np.max(np.abs(correlations), initial=0.0)
    if worst > 1.0 + CORRELATION_SLACK:
        raise NumericalError(f"Correlation magnitude {worst!r} exceeds 1 beyond tolerance")
    return np.clip(correlations, -1.0, 1.0)


def correlation_matrix(values: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Dense correlations about the origin given precomputed column scales."""
    n_obs = values.shape[0]
    moments = values.T @ values / n_obs
    dense = _clamp(moments / np.outer(scale, scale))
    np.fill_diagonal(dense, 1.0)
    return dense


def correlation_about_origin(panel: CenteredPanel) -> SymmetricMatrix:
    """Correlations from uncentered second moments of centered values.

    Raises:
        DegenerateColumnError: If a column is identically zero.
    """
    scale = _scale(panel.values, panel.asset_ids)
    return SymmetricMatrix(correlation_matrix(panel.values, scale), MatrixKind.CORRELATION)


def column_scale(panel: CenteredPanel) -> np.ndarray:
    """sqrt(sigma_ii) for every asset."""
    return _scale(panel.values, panel.asset_ids)
