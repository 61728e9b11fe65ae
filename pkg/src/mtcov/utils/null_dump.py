"""Binary persistence of null distributions.

Layout, all integers little-endian::

    magic (8 bytes) | B (uint64) | M (uint64) | seed (uint64)
    | sha256 of the centered values (32 bytes)
    | |rho~| as (B - 1) x M float64, row-major | B tie-breaking uniforms as float64

A dump is reused only when B, M, seed and the digest all match the run.
"""

import hashlib
import logging
import struct
from pathlib import Path

import numpy as np

from ..core.constants import NULL_DUMP_MAGIC
from ..core.exceptions import ParseError
from ..core.resampler import generate_null
from ..models.panel import CenteredPanel
from ..models.testing import NullDistribution, ResamplingPlan

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<8sQQQ32s")


def panel_digest(panel: CenteredPanel) -> bytes:
    """SHA-256 of the centered values in little-endian float64."""
    data = np.ascontiguousarray(panel.values, dtype="<f8")
    return hashlib.sha256(data.tobytes()).digest()


def save_null(null: NullDistribution, seed: int, digest: bytes, path: Path) -> None:
    """Write a null distribution with the header identifying its run."""
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(NULL_DUMP_MAGIC, null.replications, null.m, seed, digest)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(null.tilde_rho_abs, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(null.uniforms, dtype="<f8").tobytes())
    logger.info(f"Saved null distribution (B={null.replications}, M={null.m}) to {path}")


def load_null(path: Path) -> tuple[NullDistribution, int, bytes]:
    """Read a dump written by ``save_null``.

    Returns:
        The null distribution, its seed and the panel digest.

    Raises:
        ParseError: If the file is truncated or not a null dump.
    """
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path} is too short to be a null dump")
    magic, b, m, seed, digest = _HEADER.unpack_from(raw)
    if magic != NULL_DUMP_MAGIC:
        raise ParseError(f"{path} is not a null dump")

    n_tilde = (b - 1) * m
    expected = _HEADER.size + 8 * (n_tilde + b)
    if len(raw) != expected:
        raise ParseError(f"{path} has {len(raw)} bytes, expected {expected}")

    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    null = NullDistribution(
        tilde_rho_abs=body[:n_tilde].reshape(b - 1, m).copy(),
        uniforms=body[n_tilde:].copy(),
    )
    return null, seed, digest


def cached_null(panel: CenteredPanel, plan: ResamplingPlan, path: Path | None) -> NullDistribution:
    """Reuse a matching dump at ``path`` or generate and write a fresh one."""
    if path is None:
        return generate_null(panel, plan)

    digest = panel_digest(panel)
    m = panel.n_assets * (panel.n_assets - 1) // 2
    if path.exists():
        try:
            null, seed, stored = load_null(path)
        except ParseError as e:
            logger.warning(f"Ignoring unreadable null dump: {e}")
        else:
            if (null.replications, null.m, seed, stored) == (plan.replications, m, plan.seed, digest):
                logger.info(f"Reusing null distribution from {path}")
                return null
            logger.info(f"Null dump at {path} belongs to another run; regenerating")

    null = generate_null(panel, plan)
    save_null(null, plan.seed, digest, path)
    return null
