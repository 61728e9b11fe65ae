"""JSON report writers."""

import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from ..core.panel import vechs_indices
from ..models.testing import AdjustedPValues

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays, and map non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        return float(value) if math.isfinite(value) else None
    return value


def write_json(payload: dict[str, Any], path: Path) -> None:
    """Write a payload with sorted keys so reruns produce identical bytes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_plain(payload), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    logger.info(f"Wrote {path}")


def pvalue_report(pvalues: AdjustedPValues, asset_ids: tuple[str, ...]) -> dict[str, Any]:
    """Adjusted p-values with the asset pair each entry belongs to."""
    rows, cols = vechs_indices(len(asset_ids))
    spec = pvalues.spec
    return {
        "procedure": spec.label if spec is not None else None,
        "criterion": spec.criterion.model_dump() if spec is not None else None,
        "alpha": pvalues.alpha,
        "replications": pvalues.replications,
        "seed": spec.seed if spec is not None else None,
        "m": pvalues.m,
        "k": pvalues.k,
        "k_star": pvalues.k_star,
        "evaluations": pvalues.evaluations,
        "n_rejected": pvalues.n_rejected,
        "pairs": [
            {
                "row": asset_ids[i],
                "column": asset_ids[j],
                "pvalue": float(p),
                "rejected": bool(r),
            }
            for i, j, p, r in zip(rows, cols, pvalues.values, pvalues.rejected, strict=True)
        ],
    }
