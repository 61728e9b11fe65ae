"""Multiplicity-adjusted Monte Carlo p-values over a shared null distribution.

Every procedure here reads the same ``NullDistribution``, so rerunning a
k-FWER procedure for several k (as the FDP searches do) sees identical
artificial samples and tie-breakers.
"""

import logging
import math
from collections.abc import Callable

import numpy as np

from ..models.panel import HalfVec, SymmetricMatrix
from ..models.testing import (
    AdjustedPValues,
    Fdp,
    FdpSearch,
    KFwer,
    NullDistribution,
    StepMode,
    TestSpec,
    Unadjusted,
)
from .constants import DEFAULT_ALPHA
from .exceptions import ConfigurationError, DimensionError, FdpUnavailableError
from .panel import fill
from .resampler import rank_columns

logger = logging.getLogger(__name__)


def _check(obs: HalfVec, null: NullDistribution) -> np.ndarray:
    if obs.m != null.m:
        raise DimensionError(
            f"Observed statistics have length {obs.m}, null distribution has {null.m}"
        )
    return obs.values


def _check_k(k: int, m: int) -> None:
    if not 1 <= k <= m:
        raise ConfigurationError(f"k must lie in 1..{m}, got {k}")


def _numerators(ranks: np.ndarray, replications: int) -> np.ndarray:
    return replications - ranks + 1


def unadjusted_pvalues(
    obs: HalfVec, null: NullDistribution, alpha: float = DEFAULT_ALPHA
) -> AdjustedPValues:
    """Per-hypothesis Monte Carlo p-values (B - R + 1) / B.

    Raises:
        DimensionError: If ``obs`` and ``null`` disagree on M.
    """
    observed = _check(obs, null)
    ranks = rank_columns(observed, null.tilde_rho_abs, null.u_obs, null.u_sim)
    return AdjustedPValues(
        numerators=_numerators(ranks, null.replications),
        replications=null.replications,
        alpha=alpha,
    )


def k_max(v: np.ndarray, k: int) -> float:
    """k-th largest element of ``v``, duplicates counted with multiplicity.

    Raises:
        ConfigurationError: If k is outside 1..len(v).
    """
    v = np.asarray(v)
    _check_k(k, v.size)
    return float(np.partition(v, v.size - k)[v.size - k])


def _row_k_max(simulated: np.ndarray, k: int) -> np.ndarray:
    m = simulated.shape[1]
    return np.partition(simulated, m - k, axis=1)[:, m - k]


def single_step(
    obs: HalfVec, null: NullDistribution, k: int, alpha: float = DEFAULT_ALPHA
) -> AdjustedPValues:
    """Single-step k-FWER p-values against the row-wise k-max of the null.

    Args:
        obs: |rho_hat| in vechs order.
        null: Shared null distribution.
        k: Number of false rejections tolerated minus one.
        alpha: Level used for the rejection mask.

    Returns:
        Adjusted p-values.

    Raises:
        DimensionError: If ``obs`` and ``null`` disagree on M.
        ConfigurationError: If k is outside 1..M.
    """
    observed = _check(obs, null)
    _check_k(k, null.m)
    reference = _row_k_max(null.tilde_rho_abs, k)
    simulated = np.broadcast_to(reference[:, None], (reference.size, null.m))
    ranks = rank_columns(observed, simulated, null.u_obs, null.u_sim)
    return AdjustedPValues(
        numerators=_numerators(ranks, null.replications),
        replications=null.replications,
        alpha=alpha,
        k=k,
    )


def descending_order(observed: np.ndarray) -> np.ndarray:
    """Permutation sorting |rho_hat| from largest to smallest, ties by index."""
    return np.lexsort((np.arange(observed.size), -observed))


def step_down(
    obs: HalfVec, null: NullDistribution, k: int, alpha: float = DEFAULT_ALPHA
) -> AdjustedPValues:
    """Step-down k-FWER p-values.

    The first k ordered hypotheses are compared against the full k-max; each
    later one against the minimum of the previous reference and the maximum
    over the hypotheses not yet stepped past. P-values are then made
    monotone along the ordering and mapped back to vechs order.

    Raises:
        DimensionError: If ``obs`` and ``null`` disagree on M.
        ConfigurationError: If k is outside 1..M.
    """
    observed = _check(obs, null)
    m = null.m
    _check_k(k, m)

    order = descending_order(observed)
    simulated = null.tilde_rho_abs[:, order]
    successive = np.maximum.accumulate(simulated[:, ::-1], axis=1)[:, ::-1]
    pinned = np.repeat(_row_k_max(null.tilde_rho_abs, k)[:, None], k, axis=1)
    reference = np.minimum.accumulate(
        np.concatenate([pinned, successive[:, k:]], axis=1), axis=1
    )

    ranks = rank_columns(observed[order], reference, null.u_obs, null.u_sim)
    ordered = _numerators(ranks, null.replications)
    ordered[k - 1 :] = np.maximum.accumulate(ordered[k - 1 :])

    numerators = np.empty_like(ordered)
    numerators[order] = ordered
    return AdjustedPValues(
        numerators=numerators,
        replications=null.replications,
        alpha=alpha,
        k=k,
    )


def _k_fwer(mode: StepMode) -> Callable[..., AdjustedPValues]:
    return single_step if mode is StepMode.SINGLE_STEP else step_down


class _KFwerCache:
    """Memoized k-FWER evaluations over one null distribution."""

    def __init__(
        self, obs: HalfVec, null: NullDistribution, mode: StepMode, alpha: float
    ) -> None:
        self._procedure = _k_fwer(mode)
        self._obs = obs
        self._null = null
        self._alpha = alpha
        self.results: dict[int, AdjustedPValues] = {}

    def __call__(self, k: int) -> AdjustedPValues:
        if k not in self.results:
            self.results[k] = self._procedure(self._obs, self._null, k, self._alpha)
            logger.debug(f"k={k}: R_k={self.results[k].n_rejected}")
        return self.results[k]

    @property
    def evaluations(self) -> int:
        return len(self.results)


def _passes(k: int, result: AdjustedPValues, gamma: float) -> bool:
    return k <= gamma * (result.n_rejected + 1)


def _first_step(evaluate: _KFwerCache, gamma: float) -> AdjustedPValues | None:
    """Handle the stopping rule at k = 1; returns the answer when it fires."""
    first = evaluate(1)
    if _passes(1, first, gamma):
        return None
    if gamma == 0.0:
        return first
    raise FdpUnavailableError(first.n_rejected, gamma)


def _sequential_from(evaluate: _KFwerCache, start: int, m: int, gamma: float) -> int:
    """Largest passing k reached by stepping up from a passing ``start``."""
    k = start
    while k < m and _passes(k + 1, evaluate(k + 1), gamma):
        k += 1
    return k


def _passing_prefix(evaluate: _KFwerCache, limit: int, gamma: float) -> int:
    """Largest k <= ``limit`` such that every j in 1..k passes; k = 1 must pass.

    R_j is non-decreasing in j, so a pass at k with R_k rejections carries
    over to every j up to gamma (R_k + 1) without evaluating them.
    """
    k = 1
    while k < limit:
        reach = min(limit, math.floor(gamma * (evaluate(k).n_rejected + 1)))
        if reach > k:
            k = reach
        elif _passes(k + 1, evaluate(k + 1), gamma):
            k += 1
        else:
            break
    return k


def _fdp_result(
    evaluate: _KFwerCache, k_star: int, gamma: float, alpha: float
) -> AdjustedPValues:
    chosen = evaluate(k_star)
    logger.debug(
        f"FDP gamma={gamma:g}: k*={k_star}, R={chosen.n_rejected}, "
        f"{evaluate.evaluations} k-FWER evaluations"
    )
    return AdjustedPValues(
        numerators=chosen.numerators,
        replications=chosen.replications,
        alpha=alpha,
        k=k_star,
        k_star=k_star,
        evaluations=evaluate.evaluations,
    )


def fdp_sequential(
    obs: HalfVec,
    null: NullDistribution,
    gamma: float,
    mode: StepMode = StepMode.STEP_DOWN,
    alpha: float = DEFAULT_ALPHA,
) -> AdjustedPValues:
    """FDP-adjusted p-values by stepping k = 1, 2, ... until k > gamma (R_k + 1).

    Returns the k-FWER p-values of the last k that satisfied the rule. With
    gamma = 0 the rule fails at once and the 1-FWER p-values are returned.

    Raises:
        FdpUnavailableError: If the rule fails at k = 1 while gamma > 0.
        DimensionError: If ``obs`` and ``null`` disagree on M.
    """
    _check(obs, null)
    evaluate = _KFwerCache(obs, null, mode, alpha)
    early = _first_step(evaluate, gamma)
    k_star = 1 if early is not None else _sequential_from(evaluate, 1, null.m, gamma)
    return _fdp_result(evaluate, k_star, gamma, alpha)


def fdp_bisection(
    obs: HalfVec,
    null: NullDistribution,
    gamma: float,
    mode: StepMode = StepMode.STEP_DOWN,
    alpha: float = DEFAULT_ALPHA,
) -> AdjustedPValues:
    """FDP-adjusted p-values with k* bracketed by bisection on [1, M].

    The bracket keeps a passing lower end. Passing k need not form a prefix
    of 1..M, so the lower end is only trusted once every k below it is known
    to pass; a failure found on the way is the sequential answer. The
    sequential search then finishes from the lower end, reusing every
    evaluation already made.

    Raises:
        FdpUnavailableError: If the rule fails at k = 1 while gamma > 0.
        DimensionError: If ``obs`` and ``null`` disagree on M.
    """
    _check(obs, null)
    m = null.m
    evaluate = _KFwerCache(obs, null, mode, alpha)
    if _first_step(evaluate, gamma) is not None:
        return _fdp_result(evaluate, 1, gamma, alpha)

    low, high = 1, m
    while high - low > 1:
        mid = (low + high) // 2
        if _passes(mid, evaluate(mid), gamma):
            low = mid
        else:
            high = mid

    prefix = _passing_prefix(evaluate, low, gamma)
    if prefix < low:
        logger.debug(f"FDP gamma={gamma:g}: k={prefix + 1} fails below the bracket at {low}")
        k_star = prefix
    else:
        k_star = _sequential_from(evaluate, low, m, gamma)
    return _fdp_result(evaluate, k_star, gamma, alpha)


def adjust(obs: HalfVec, null: NullDistribution, spec: TestSpec) -> AdjustedPValues:
    """Apply the procedure described by ``spec``.

    Raises:
        ConfigurationError: If B or k does not fit the null distribution.
        FdpUnavailableError: If an FDP run cannot produce p-values.
    """
    if spec.replications != null.replications:
        raise ConfigurationError(
            f"Test asks for B={spec.replications}, null distribution has B={null.replications}"
        )

    criterion = spec.criterion
    if isinstance(criterion, Unadjusted):
        result = unadjusted_pvalues(obs, null, spec.alpha)
    elif isinstance(criterion, KFwer):
        k = criterion.resolve(null.m)
        result = _k_fwer(spec.mode)(obs, null, k, spec.alpha)
    elif isinstance(criterion, Fdp):
        search = fdp_bisection if spec.fdp_search is FdpSearch.BISECTION else fdp_sequential
        result = search(obs, null, criterion.gamma, spec.mode, spec.alpha)
    else:
        raise ConfigurationError(f"Unknown criterion {criterion!r}")

    return AdjustedPValues(
        numerators=result.numerators,
        replications=result.replications,
        alpha=result.alpha,
        spec=spec,
        k=result.k,
        k_star=result.k_star,
        evaluations=result.evaluations,
    )


def pvalue_matrix(pvalues: AdjustedPValues) -> SymmetricMatrix:
    """Dense N x N matrix of p-values with a zero diagonal."""
    return fill(HalfVec(pvalues.values), diagonal=0.0)
