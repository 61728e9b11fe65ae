"""Thresholding, shrinkage toward the identity and covariance assembly."""

import logging
import math

import numpy as np
from scipy import linalg, stats

from ..models.covariance import (
    BpsUniversalRule,
    FChoice,
    MultipleTestingRule,
    RegularizedCovariance,
    ThresholdRule,
)
from ..models.panel import CenteredPanel, MatrixKind, SymmetricMatrix
from .constants import DEFAULT_EPSILON, EIGENVALUE_TOLERANCE, INTEGRALITY_TOLERANCE
from .exceptions import ConfigurationError, DimensionError, NumericalError
from .panel import column_scale, correlation_about_origin, vechs_indices

logger = logging.getLogger(__name__)


def normal_critical_value(alpha: float, f: float) -> float:
    """Phi^-1(1 - alpha / (2 f))."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    if f <= 0:
        raise ConfigurationError(f"f must be positive, got {f}")
    return float(stats.norm.ppf(1.0 - alpha / (2.0 * f)))


def bps_critical_value(alpha: float, n_assets: int, f_choice: FChoice) -> float:
    """Universal critical value c_alpha(N) with f(N) = N^2 or N(N-1)/2."""
    if n_assets < 2:
        raise ConfigurationError(f"At least 2 assets are required, got {n_assets}")
    return normal_critical_value(alpha, f_choice.scale(n_assets))


def _surviving(gamma_hat: SymmetricMatrix, rule: ThresholdRule, n_obs: int) -> np.ndarray:
    rows, cols = vechs_indices(gamma_hat.dim)
    rho = gamma_hat.entries[rows, cols]

    if isinstance(rule, BpsUniversalRule):
        if n_obs < 1:
            raise ConfigurationError(f"T must be positive, got {n_obs}")
        c = rule.critical_value
        if c is None:
            c = bps_critical_value(rule.alpha, gamma_hat.dim, rule.f_choice)
        return np.abs(rho) > c / math.sqrt(n_obs)

    pvalues = rule.pvalues
    if pvalues.m != rho.size:
        raise DimensionError(f"{pvalues.m} p-values for {rho.size} correlations")
    cutoff = math.floor(rule.alpha * pvalues.replications + INTEGRALITY_TOLERANCE)
    return pvalues.numerators <= cutoff


def threshold(
    gamma_hat: SymmetricMatrix, rule: ThresholdRule, n_obs: int
) -> tuple[SymmetricMatrix, np.ndarray]:
    """Zero every off-diagonal correlation the rule does not retain.

    Args:
        gamma_hat: Sample correlation matrix.
        rule: Multiple-testing p-values or the universal threshold.
        n_obs: Sample size T used by the universal threshold.

    Returns:
        Thresholded correlation matrix and the vechs-ordered survival mask.

    Raises:
        DimensionError: If the p-values are not aligned with ``gamma_hat``.
    """
    mask = _surviving(gamma_hat, rule, n_obs)
    return mask_correlations(gamma_hat, mask), mask


def mask_correlations(gamma_hat: SymmetricMatrix, mask: np.ndarray) -> SymmetricMatrix:
    """Keep the vechs-ordered entries flagged in ``mask`` and zero the rest.

    Raises:
        DimensionError: If the mask length differs from M.
    """
    rows, cols = vechs_indices(gamma_hat.dim)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != rows.shape:
        raise DimensionError(f"Mask has length {mask.size}, expected {rows.size}")
    dense = np.eye(gamma_hat.dim)
    kept = np.where(mask, gamma_hat.entries[rows, cols], 0.0)
    dense[rows, cols] = kept
    dense[cols, rows] = kept
    return SymmetricMatrix(dense, MatrixKind.CORRELATION)


def shrinkage_intensity(rho: np.ndarray, n_obs: int) -> float:
    """Closed-form identity-target weight from the off-diagonal correlations."""
    adjusted = rho - rho * (1.0 - rho**2) / (2.0 * n_obs)
    numerator = math.fsum(rho * adjusted)
    denominator = math.fsum((1.0 - rho**2) ** 2) / n_obs + math.fsum(adjusted**2)
    if denominator <= 0.0:
        return 1.0
    return min(1.0, max(0.0, 1.0 - numerator / denominator))


def reference_matrix(
    gamma_hat: SymmetricMatrix, n_obs: int
) -> tuple[SymmetricMatrix, float]:
    """theta* I + (1 - theta*) Gamma_hat with theta* clamped to [0, 1].

    Raises:
        ConfigurationError: If T < 2.
    """
    if n_obs < 2:
        raise ConfigurationError(f"At least 2 observations are required, got {n_obs}")
    rows, cols = vechs_indices(gamma_hat.dim)
    theta = shrinkage_intensity(gamma_hat.entries[rows, cols], n_obs)
    dense = theta * np.eye(gamma_hat.dim) + (1.0 - theta) * gamma_hat.entries
    np.fill_diagonal(dense, 1.0)
    return SymmetricMatrix(dense, MatrixKind.CORRELATION), theta


def _xi_grid(xi_0: float, epsilon: float) -> np.ndarray:
    step = epsilon / 2.0
    count = math.floor((1.0 - xi_0) / step)
    grid = xi_0 + step * np.arange(count + 1)
    # xi = 1 gives the identity and loses every surviving correlation
    grid = grid[grid < 1.0 - step / 2.0]
    return grid if grid.size else np.array([xi_0])


def shrink_to_pd(
    gamma_thr: SymmetricMatrix,
    gamma_0: SymmetricMatrix,
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[SymmetricMatrix, float, tuple[float, float]]:
    """Shrink a thresholded correlation matrix toward I until lambda_min >= epsilon.

    The intensity is the grid point closest, in Frobenius norm of the
    inverses, to the reference matrix. The grid starts at the smallest
    intensity that lifts lambda_min to epsilon and steps by epsilon / 2,
    stopping short of 1 so that the zeros of the input stay zero. Ties go to
    the smallest intensity.

    Args:
        gamma_thr: Thresholded correlation matrix.
        gamma_0: Invertible reference matrix.
        epsilon: Eigenvalue floor in (0, 0.5].

    Returns:
        Shrunk matrix, chosen intensity, and lambda_min before and after.

    Raises:
        ConfigurationError: If epsilon is out of range.
        DimensionError: If the matrices differ in size.
        NumericalError: If the reference matrix is singular.
    """
    if not 0.0 < epsilon <= 0.5:
        raise ConfigurationError(f"epsilon must lie in (0, 0.5], got {epsilon}")
    if gamma_thr.dim != gamma_0.dim:
        raise DimensionError(f"Matrices of size {gamma_thr.dim} and {gamma_0.dim}")

    n = gamma_thr.dim
    identity = np.eye(n)
    eigenvalues, vectors = linalg.eigh(gamma_thr.entries)
    lambda_before = float(eigenvalues[0])

    if np.array_equal(gamma_thr.entries, identity):
        return gamma_thr, 0.0, (lambda_before, lambda_before)

    xi_0 = 0.0
    if lambda_before < epsilon:
        xi_0 = max(0.0, (epsilon - lambda_before) / (1.0 - lambda_before))
    grid = _xi_grid(xi_0, epsilon)

    try:
        projected = vectors.T @ linalg.solve(gamma_0.entries, vectors, assume_a="sym")
    except linalg.LinAlgError as e:
        raise NumericalError(f"Reference matrix is singular: {e}") from e

    # ||C - diag(d)||^2 = ||C||^2 - 2 sum C_ii d_i + sum d_i^2 with C = Q' G0^-1 Q
    shifted = grid[:, None] + (1.0 - grid[:, None]) * eigenvalues[None, :]
    feasible = np.all(shifted > EIGENVALUE_TOLERANCE, axis=1)
    inverse = np.divide(1.0, shifted, out=np.zeros_like(shifted), where=shifted > 0)
    diagonal = np.diag(projected)
    objective = (
        np.sum(projected**2)
        - 2.0 * inverse @ diagonal
        + np.sum(inverse**2, axis=1)
    )
    objective[~feasible] = np.inf
    xi_star = float(grid[int(np.argmin(objective))])

    dense = xi_star * identity + (1.0 - xi_star) * gamma_thr.entries
    np.fill_diagonal(dense, 1.0)
    lambda_after = float(linalg.eigvalsh(dense)[0])
    if lambda_after < epsilon - EIGENVALUE_TOLERANCE:
        raise NumericalError(
            f"Shrunk matrix has lambda_min={lambda_after:.3e} below epsilon={epsilon}"
        )

    logger.debug(
        f"xi*={xi_star:.4f} over {grid.size} grid points, "
        f"lambda_min {lambda_before:.4f} -> {lambda_after:.4f}"
    )
    return SymmetricMatrix(dense, MatrixKind.CORRELATION), xi_star, (lambda_before, lambda_after)


def assemble_covariance(panel: CenteredPanel, gamma_final: SymmetricMatrix) -> SymmetricMatrix:
    """sigma_ij = gamma_ij sqrt(sigma_ii sigma_jj) with sample second moments.

    Raises:
        DimensionError: If the matrix and panel differ in N.
    """
    if gamma_final.dim != panel.n_assets:
        raise DimensionError(
            f"Correlation matrix has size {gamma_final.dim}, panel has {panel.n_assets} assets"
        )
    scale = column_scale(panel)
    dense = gamma_final.entries * np.outer(scale, scale)
    np.fill_diagonal(dense, panel.second_moments)
    return SymmetricMatrix(dense, MatrixKind.COVARIANCE)


def regularize(
    panel: CenteredPanel,
    rule: ThresholdRule,
    epsilon: float = DEFAULT_EPSILON,
) -> RegularizedCovariance:
    """Threshold, shrink and rescale the correlation matrix of ``panel``.

    Args:
        panel: Centered returns.
        rule: Thresholding rule.
        epsilon: Eigenvalue floor for the shrunk correlation matrix.

    Returns:
        Regularized correlation and covariance with diagnostics.
    """
    gamma_hat = correlation_about_origin(panel)
    thresholded, mask = threshold(gamma_hat, rule, panel.n_obs)
    reference, theta = reference_matrix(gamma_hat, panel.n_obs)
    shrunk, xi_star, (lambda_before, lambda_after) = shrink_to_pd(thresholded, reference, epsilon)

    kind = "multiple testing" if isinstance(rule, MultipleTestingRule) else "universal threshold"
    logger.info(
        f"Regularized {panel.n_assets} assets by {kind}: {int(mask.sum())}/{mask.size} "
        f"correlations kept, xi*={xi_star:.4f}, theta*={theta:.4f}"
    )
    return RegularizedCovariance(
        correlation=shrunk,
        covariance=assemble_covariance(panel, shrunk),
        sparsity_mask=mask,
        xi_star=xi_star,
        lambda_min_before=lambda_before,
        lambda_min_after=lambda_after,
        theta_star=theta,
    )
