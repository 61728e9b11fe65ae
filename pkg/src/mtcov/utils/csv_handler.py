"""CSV reading and writing for return panels, matrices and result tables."""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ..core.constants import DATE_COLUMN
from ..core.exceptions import DimensionError, ParseError
from ..models.panel import ReturnsPanel, SymmetricMatrix

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def read_returns_csv(path: Path) -> ReturnsPanel:
    """Read a T x N returns panel.

    The first column must be named ``date`` and hold strictly increasing
    labels; every other column is an asset. Rows are reported by their line
    number in the file, the header being line 1.

    Args:
        path: CSV file.

    Returns:
        Parsed panel.

    Raises:
        ParseError: If the file is missing, malformed or has non-numeric cells.
        DimensionError: If fewer than two assets or observations remain.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError as e:
        raise ParseError(f"Returns file not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f"Cannot parse {path}: {e}") from e

    columns = [str(c).strip() for c in frame.columns]
    if not columns or columns[0].lower() != DATE_COLUMN:
        raise ParseError(f"First column must be {DATE_COLUMN!r}", row=1, column=columns[0] if columns else None)
    assets = columns[1:]
    duplicated = sorted({a for a in assets if assets.count(a) > 1})
    if duplicated:
        raise ParseError(f"Duplicate asset columns {duplicated}", row=1)
    if len(assets) < 2:
        raise DimensionError(f"At least 2 asset columns are required, got {len(assets)}")

    values = np.empty((len(frame), len(assets)))
    for j, asset in enumerate(assets):
        cells = frame.iloc[:, j + 1].str.strip()
        parsed = pd.to_numeric(cells, errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(parsed))
        if bad.size:
            i = int(bad[0])
            raise ParseError(f"Non-numeric value {cells.iloc[i]!r}", row=i + 2, column=asset)
        values[:, j] = parsed

    timestamps = tuple(frame.iloc[:, 0].str.strip())
    for i in range(1, len(timestamps)):
        if timestamps[i] <= timestamps[i - 1]:
            raise ParseError(
                f"Dates must be strictly increasing, {timestamps[i]!r} follows {timestamps[i - 1]!r}",
                row=i + 2,
                column=DATE_COLUMN,
            )

    logger.info(f"Read {len(frame)} observations of {len(assets)} assets from {path}")
    return ReturnsPanel(observations=values, asset_ids=tuple(assets), timestamps=timestamps)


def write_returns_csv(panel: ReturnsPanel, path: Path) -> None:
    """Write a panel in the layout ``read_returns_csv`` accepts."""
    frame = pd.DataFrame(panel.observations, columns=list(panel.asset_ids))
    frame.insert(0, DATE_COLUMN, list(panel.timestamps))
    _write(frame, path, index=False)


def write_matrix_csv(matrix: SymmetricMatrix, asset_ids: Sequence[str], path: Path) -> None:
    """Write a dense N x N matrix with asset ids as header and first column.

    Raises:
        DimensionError: If the number of ids differs from N.
    """
    if len(asset_ids) != matrix.dim:
        raise DimensionError(f"{len(asset_ids)} asset ids for a {matrix.dim} x {matrix.dim} matrix")
    frame = pd.DataFrame(matrix.entries, index=list(asset_ids), columns=list(asset_ids))
    frame.index.name = "asset"
    _write(frame, path, index=True)


def read_matrix_csv(path: Path) -> pd.DataFrame:
    """Read a matrix written by ``write_matrix_csv``."""
    return pd.read_csv(path, index_col=0)


def write_series_csv(series: pd.Series, path: Path, index_label: str = DATE_COLUMN) -> None:
    """Write a labelled series as two columns."""
    frame = series.to_frame()
    frame.index.name = index_label
    _write(frame, path, index=True)


def write_frame_csv(frame: pd.DataFrame, path: Path, index_label: str = DATE_COLUMN) -> None:
    """Write a frame whose index holds timestamps."""
    frame = frame.copy()
    frame.index.name = index_label
    _write(frame, path, index=True)


def write_table_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str], path: Path) -> None:
    """Write result rows as a tidy table with a fixed column order."""
    _write(pd.DataFrame(list(rows), columns=list(columns)), path, index=False)


def _write(frame: pd.DataFrame, path: Path, index: bool) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
