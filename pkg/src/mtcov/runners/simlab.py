"""CCC-GARCH simulation rig for error rates, power and Frobenius losses."""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..core.constants import (
    BURN_IN,
    CALIBRATION_STREAM,
    DEFAULT_EPSILON,
    DGP_STREAM,
    INTEGRALITY_TOLERANCE,
    REPLICATION_STREAM,
)
from ..core.exceptions import (
    ConfigurationError,
    ConstructionError,
    DimensionError,
    FdpUnavailableError,
    MtcovError,
)
from ..core.mtest import adjust
from ..core.panel import center, correlation_about_origin, vechs, vechs_indices
from ..core.regularizer import (
    assemble_covariance,
    bps_critical_value,
    mask_correlations,
    reference_matrix,
    shrink_to_pd,
)
from ..core.resampler import derived_seed, generate_null, stream
from ..models.panel import HalfVec, MatrixKind, ReturnsPanel, SymmetricMatrix
from ..models.simulation import (
    BpsProcedure,
    DgpSpec,
    ExperimentResult,
    Procedure,
    ProcedureOutcome,
    SimulationGrid,
)
from ..models.strategy import StrategyKind, parse_strategy
from ..models.testing import Fdp, KFwer, NullDistribution, ResamplingPlan, TestSpec

logger = logging.getLogger(__name__)


def build_correlation(
    n_assets: int, delta: float, rng: np.random.Generator
) -> tuple[SymmetricMatrix, np.ndarray]:
    """Gamma = I + cc' - diag(cc') with floor(delta N) non-zero loadings.

    Non-zero loadings follow the triangular law on [0, 1] with mode 1 and
    sit at random positions.

    Returns:
        Correlation matrix and the vechs-ordered mask of non-zero entries.

    Raises:
        ConfigurationError: If delta is outside [0, 1].
    """
    if not 0.0 <= delta <= 1.0:
        raise ConfigurationError(f"delta must lie in [0, 1], got {delta}")
    n_loaded = math.floor(delta * n_assets + INTEGRALITY_TOLERANCE)
    loadings = np.zeros(n_assets)
    positions = rng.choice(n_assets, size=n_loaded, replace=False)
    # inverse CDF of the triangular law with mode 1
    loadings[positions] = np.sqrt(rng.random(n_loaded))

    dense = np.outer(loadings, loadings)
    np.fill_diagonal(dense, 1.0)
    rows, cols = vechs_indices(n_assets)
    loaded = loadings != 0.0
    return SymmetricMatrix(dense, MatrixKind.CORRELATION), loaded[rows] & loaded[cols]


def _innovations(spec: DgpSpec, rng: np.random.Generator, size: tuple[int, int]) -> np.ndarray:
    if spec.innovation.kind == "normal":
        return rng.standard_normal(size)
    df = float(spec.innovation.df or 0.0)
    return rng.standard_t(df, size) * math.sqrt((df - 2.0) / df)


def simulate_panel(
    spec: DgpSpec,
    gamma: SymmetricMatrix,
    rng: np.random.Generator | None = None,
) -> ReturnsPanel:
    """Draw T returns from the CCC-GARCH(1,1) model after a burn-in.

    Args:
        spec: Design of the cell.
        gamma: Constant conditional correlation matrix.
        rng: Generator to draw from; defaults to the DGP stream of
            ``spec.dgp_seed``.

    Returns:
        Simulated returns with zero location.

    Raises:
        ConstructionError: If ``gamma`` is not positive definite.
        DimensionError: If ``gamma`` does not have N rows.
    """
    if gamma.dim != spec.n_assets:
        raise DimensionError(f"Correlation matrix has size {gamma.dim}, expected {spec.n_assets}")
    try:
        factor = linalg.cholesky(gamma.entries, lower=True)
    except linalg.LinAlgError as e:
        raise ConstructionError(f"Correlation matrix is not positive definite: {e}") from e

    if rng is None:
        rng = stream(spec.dgp_seed, DGP_STREAM)
    omega, arch, persistence = spec.garch
    total = BURN_IN + spec.n_obs
    shocks = _innovations(spec, rng, (total, spec.n_assets)) @ factor.T

    returns = np.empty_like(shocks)
    variance = np.full(spec.n_assets, spec.unconditional_variance)
    for t in range(total):
        returns[t] = np.sqrt(variance) * shocks[t]
        variance = omega + arch * returns[t] ** 2 + persistence * variance

    width = len(str(spec.n_obs))
    return ReturnsPanel(
        observations=returns[BURN_IN:],
        asset_ids=tuple(f"A{i + 1}" for i in range(spec.n_assets)),
        timestamps=tuple(f"{t:0{width}d}" for t in range(spec.n_obs)),
    )


def frobenius_loss(estimate: SymmetricMatrix, truth: SymmetricMatrix) -> float:
    """Frobenius norm of the entrywise difference.

    Raises:
        DimensionError: If the matrices differ in size.
    """
    if estimate.dim != truth.dim:
        raise DimensionError(f"Matrices of size {estimate.dim} and {truth.dim}")
    return float(np.linalg.norm(estimate.entries - truth.entries, ord="fro"))


def _error(procedure: Procedure, m: int, false_rejections: int, rejections: int) -> bool:
    if isinstance(procedure, TestSpec):
        criterion = procedure.criterion
        if isinstance(criterion, Fdp):
            return false_rejections / max(rejections, 1) > criterion.gamma
        if isinstance(criterion, KFwer):
            return false_rejections >= criterion.resolve(m)
    return false_rejections >= 1


@dataclass(frozen=True)
class _Draw:
    """Outcome of every procedure in one outer replication."""

    errors: tuple[bool, ...]
    powers: tuple[float | None, ...]
    losses: tuple[float, ...]
    fdp_failures: tuple[bool, ...]
    sample_loss: float


class _Replication:
    """Runs every procedure on one simulated panel."""

    def __init__(
        self,
        spec: DgpSpec,
        procedures: Sequence[Procedure],
        critical_values: dict[str, float],
        epsilon: float,
    ) -> None:
        self.spec = spec
        self.procedures = procedures
        self.critical_values = critical_values
        self.epsilon = epsilon

    def __call__(self, replication: int) -> _Draw:
        spec = self.spec
        rng = stream(spec.dgp_seed, DGP_STREAM, replication)
        gamma, truth = build_correlation(spec.n_assets, spec.delta, rng)
        centered = center(simulate_panel(spec, gamma, rng))
        gamma_hat = correlation_about_origin(centered)
        observed = HalfVec(np.abs(vechs(gamma_hat).values))
        rho = observed.values
        sigma = SymmetricMatrix(spec.unconditional_variance * gamma.entries, MatrixKind.COVARIANCE)
        reference, _ = reference_matrix(gamma_hat, spec.n_obs)
        test_seed = derived_seed(spec.dgp_seed, REPLICATION_STREAM, replication)
        nulls: dict[int, NullDistribution] = {}

        errors: list[bool] = []
        powers: list[float | None] = []
        losses: list[float] = []
        failures: list[bool] = []
        for procedure in self.procedures:
            failed = False
            if isinstance(procedure, TestSpec):
                if procedure.replications not in nulls:
                    plan = ResamplingPlan(
                        replications=procedure.replications, seed=test_seed, workers=1
                    )
                    nulls[procedure.replications] = generate_null(centered, plan)
                run_spec = procedure.model_copy(update={"seed": test_seed})
                try:
                    mask = adjust(observed, nulls[procedure.replications], run_spec).rejected
                except FdpUnavailableError:
                    mask = np.zeros(rho.size, dtype=bool)
                    failed = True
            else:
                c = self.critical_values[procedure.label]
                mask = rho > c / math.sqrt(spec.n_obs)

            false_rejections = int(np.count_nonzero(mask & ~truth))
            true_rejections = int(np.count_nonzero(mask & truth))
            n_false = int(truth.sum())
            errors.append(_error(procedure, rho.size, false_rejections, int(mask.sum())))
            powers.append(true_rejections / n_false if n_false else None)
            failures.append(failed)

            shrunk, _, _ = shrink_to_pd(mask_correlations(gamma_hat, mask), reference, self.epsilon)
            losses.append(frobenius_loss(assemble_covariance(centered, shrunk), sigma))

        return _Draw(
            errors=tuple(errors),
            powers=tuple(powers),
            losses=tuple(losses),
            fdp_failures=tuple(failures),
            sample_loss=frobenius_loss(assemble_covariance(centered, gamma_hat), sigma),
        )


def calibrate_bps_critical_value(
    spec: DgpSpec,
    alpha: float,
    replications: int,
    workers: int | None = None,
) -> float:
    """Critical value giving strong FWER control at ``alpha`` for this design.

    Simulates the design, records the largest sqrt(T) |rho_hat| over the
    truly zero correlations and returns its empirical (1 - alpha) quantile.

    Raises:
        ConfigurationError: If the design has no zero correlations.
    """

    def statistic(replication: int) -> float:
        rng = stream(spec.dgp_seed, CALIBRATION_STREAM, replication)
        gamma, truth = build_correlation(spec.n_assets, spec.delta, rng)
        gamma_hat = correlation_about_origin(center(simulate_panel(spec, gamma, rng)))
        rho = np.abs(vechs(gamma_hat).values)
        if truth.all():
            raise ConfigurationError("Size adjustment needs at least one zero correlation")
        return float(math.sqrt(spec.n_obs) * rho[~truth].max())

    with ThreadPoolExecutor(max_workers=workers) as executor:
        statistics = np.array(list(executor.map(statistic, range(replications))))
    critical = float(np.quantile(statistics, 1.0 - alpha, method="inverted_cdf"))
    logger.info(
        f"Size-adjusted critical value for N={spec.n_assets}, T={spec.n_obs}, "
        f"delta={spec.delta}: {critical:.4f}"
    )
    return critical


def _stderr(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _bps_critical_values(
    spec: DgpSpec,
    procedures: Sequence[Procedure],
    replications: int,
    workers: int | None,
) -> dict[str, float]:
    values: dict[str, float] = {}
    calibrated: dict[float, float] = {}
    for procedure in procedures:
        if not isinstance(procedure, BpsProcedure):
            continue
        if procedure.size_adjusted:
            if procedure.alpha not in calibrated:
                calibrated[procedure.alpha] = calibrate_bps_critical_value(
                    spec, procedure.alpha, replications, workers
                )
            values[procedure.label] = calibrated[procedure.alpha]
        else:
            values[procedure.label] = bps_critical_value(
                procedure.alpha, spec.n_assets, procedure.f_choice
            )
    return values


def run_error_rate_experiment(
    spec: DgpSpec,
    procedures: Sequence[Procedure],
    replications: int,
    epsilon: float = DEFAULT_EPSILON,
    workers: int | None = None,
    calibration_replications: int | None = None,
) -> ExperimentResult:
    """Estimate error rates, average power and Frobenius losses for one cell.

    Outer replications run in parallel; counts are accumulated in
    replication order so the result does not depend on ``workers``.

    Args:
        spec: Design of the cell.
        procedures: Multiple-testing and universal-threshold procedures.
        replications: Number of outer Monte Carlo replications R.
        epsilon: Eigenvalue floor of the regularized estimates.
        workers: Thread cap for the outer replications.
        calibration_replications: Replications for size-adjusted BPS
            critical values, defaults to ``replications``.

    Returns:
        Per-procedure outcomes.

    Raises:
        ConfigurationError: If R < 1 or no procedure is given.
    """
    if replications < 1:
        raise ConfigurationError(f"At least one replication is required, got {replications}")
    if not procedures:
        raise ConfigurationError("No procedures to evaluate")
    labels = [p.label for p in procedures]
    if len(set(labels)) != len(labels):
        raise ConfigurationError(f"Duplicate procedures: {labels}")

    critical_values = _bps_critical_values(
        spec, procedures, calibration_replications or replications, workers
    )
    replicate = _Replication(spec, procedures, critical_values, epsilon)

    logger.info(
        f"Cell N={spec.n_assets}, T={spec.n_obs}, delta={spec.delta}, "
        f"{spec.innovation.label}: {replications} replications of {len(procedures)} procedures"
    )
    with ThreadPoolExecutor(max_workers=workers) as executor:
        draws = list(executor.map(replicate, range(replications)))

    outcomes = []
    for i, label in enumerate(labels):
        hits = sum(d.errors[i] for d in draws)
        rate = hits / replications
        powers = [p for d in draws if (p := d.powers[i]) is not None]
        outcomes.append(
            ProcedureOutcome(
                label=label,
                error_rate=rate,
                error_rate_stderr=math.sqrt(rate * (1.0 - rate) / replications),
                average_power=math.fsum(powers) / len(powers) if powers else None,
                average_power_stderr=_stderr(powers) if powers else None,
                frobenius_loss_mean=math.fsum(d.losses[i] for d in draws) / replications,
                fdp_failures=sum(d.fdp_failures[i] for d in draws),
            )
        )

    return ExperimentResult(
        spec=spec,
        replications=replications,
        outcomes=tuple(outcomes),
        sample_frobenius_loss_mean=math.fsum(d.sample_loss for d in draws) / replications,
        critical_values={k: v for k, v in critical_values.items() if k.endswith("_adj")},
    )


def grid_procedures(grid: SimulationGrid) -> list[Procedure]:
    """Turn the grid's procedure strings into runnable procedures.

    Raises:
        ConfigurationError: If a string names a portfolio-only strategy.
    """
    procedures: list[Procedure] = []
    for text in grid.procedures:
        strategy = parse_strategy(text)
        if strategy.kind is StrategyKind.BPS and strategy.f_choice is not None:
            procedures.append(
                BpsProcedure(
                    f_choice=strategy.f_choice,
                    alpha=grid.alpha,
                    size_adjusted=strategy.size_adjusted,
                )
            )
        elif strategy.is_multiple_testing:
            procedures.append(
                strategy.test_spec(grid.alpha, grid.test_replications, grid.seed)
            )
        else:
            raise ConfigurationError(f"{text!r} is not a testing procedure")
    return procedures


class SimulationLab:
    """Runs every cell of a simulation grid."""

    def __init__(self, grid: SimulationGrid, workers: int | None = None) -> None:
        """Initialize the lab.

        Args:
            grid: Experiment grid.
            workers: Thread cap for outer replications.
        """
        self.grid = grid
        self.workers = workers
        self.procedures = grid_procedures(grid)

    def run(self) -> list[ExperimentResult]:
        """Run all cells in grid order.

        Raises:
            MtcovError: Re-raised after logging the failing cell.
        """
        cells = self.grid.cells()
        logger.info(f"Starting simulation grid with {len(cells)} cells")
        results = []
        for cell in cells:
            try:
                results.append(self.run_cell(cell))
            except MtcovError as e:
                logger.error(
                    f"Cell N={cell.n_assets}, T={cell.n_obs}, delta={cell.delta}, "
                    f"{cell.innovation.label} failed: {e}"
                )
                raise
        return results

    def run_cell(self, cell: DgpSpec) -> ExperimentResult:
        return run_error_rate_experiment(
            cell,
            self.procedures,
            self.grid.replications,
            epsilon=self.grid.epsilon,
            workers=self.workers,
            calibration_replications=self.grid.calibration_replications,
        )
