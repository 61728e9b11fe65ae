"""Sign-flip resampling and lexicographic ranks."""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..models.panel import CenteredPanel
from ..models.testing import NullDistribution, ResamplingPlan
from .constants import SIGN_STREAM, UNIFORM_STREAM
from .panel import column_scale, correlation_matrix, vechs_indices

logger = logging.getLogger(__name__)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a named substream of the root seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def derived_seed(seed: int, *key: int) -> int:
    """Child seed for a nested run, such as one outer replication."""
    return int(stream(seed, *key).integers(2**63))


def rademacher_signs(seed: int, replication: int, shape: tuple[int, int]) -> np.ndarray:
    """Equiprobable +-1 signs for one replication, keyed by (seed, b)."""
    rng = stream(seed, SIGN_STREAM, replication)
    return rng.integers(0, 2, size=shape, dtype=np.int8) * 2 - 1


def tie_breakers(seed: int, count: int) -> np.ndarray:
    """Pairwise distinct draws from the open interval (0, 1)."""
    rng = stream(seed, UNIFORM_STREAM)
    u = rng.random(count)
    while True:
        _, first = np.unique(u, return_index=True)
        bad = np.ones(count, dtype=bool)
        bad[first] = False
        bad |= u <= 0.0
        if not bad.any():
            return u
        u[bad] = rng.random(int(bad.sum()))


def generate_null(panel: CenteredPanel, plan: ResamplingPlan) -> NullDistribution:
    """Build |vechs(correlation)| for B - 1 sign-flipped artificial samples.

    Flipping signs leaves every second moment sigma_ii unchanged, so the
    column scales are computed once from the observed panel.

    Args:
        panel: Centered returns.
        plan: Replication count, seed and worker cap.

    Returns:
        Null distribution shared by every adjustment procedure.

    Raises:
        DegenerateColumnError: If a column is identically zero.
    """
    values = panel.values
    scale = column_scale(panel)
    rows, cols = vechs_indices(panel.n_assets)
    dtype = np.float32 if plan.single_precision else np.float64

    def replicate(b: int) -> np.ndarray:
        signs = rademacher_signs(plan.seed, b, values.shape)
        dense = correlation_matrix(values * signs, scale)
        return np.abs(dense[rows, cols]).astype(dtype, copy=False)

    draws = plan.replications - 1
    logger.debug(
        f"Generating {draws} artificial samples for T={panel.n_obs}, N={panel.n_assets}"
    )
    with ThreadPoolExecutor(max_workers=plan.workers) as executor:
        # map preserves submission order, so row b is replication b for any worker count
        rows_out = list(executor.map(replicate, range(draws)))

    matrix = np.vstack(rows_out) if rows_out else np.empty((0, rows.size), dtype=dtype)
    return NullDistribution(
        tilde_rho_abs=matrix,
        uniforms=tie_breakers(plan.seed, plan.replications),
    )


def lexicographic_rank(
    observed: float,
    simulated: np.ndarray,
    u_obs: float,
    u_sim: np.ndarray,
) -> int:
    """Rank of ``observed`` among ``simulated`` with ties broken by uniforms.

    Returns:
        1 + #{observed > sim_b} + #{observed == sim_b and u_obs > u_sim_b}.
    """
    simulated = np.asarray(simulated)
    u_sim = np.asarray(u_sim)
    above = np.count_nonzero(observed > simulated)
    tied = np.count_nonzero((observed == simulated) & (u_obs > u_sim))
    return 1 + int(above) + int(tied)


def rank_columns(
    observed: np.ndarray,
    simulated: np.ndarray,
    u_obs: float,
    u_sim: np.ndarray,
) -> np.ndarray:
    """Lexicographic ranks of observed[l] against column l of ``simulated``.

    Args:
        observed: Length-M statistics.
        simulated: (B - 1) x M reference values.
        u_obs: Tie-breaker of the observed statistics.
        u_sim: Length B - 1 tie-breakers of the simulated rows.

    Returns:
        Integer ranks in 1..B.
    """
    observed = np.asarray(observed).astype(simulated.dtype, copy=False)
    above = np.count_nonzero(observed[None, :] > simulated, axis=0)
    wins = (u_obs > np.asarray(u_sim))[:, None]
    tied = np.count_nonzero((observed[None, :] == simulated) & wins, axis=0)
    return 1 + above + tied
