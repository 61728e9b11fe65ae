"""Unit tests for k-FWER and FDP adjusted p-values."""

import math

import numpy as np
import pytest
from scipy import stats

from mtcov.core.exceptions import ConfigurationError, DimensionError, FdpUnavailableError
from mtcov.core.mtest import (
    adjust,
    fdp_bisection,
    fdp_sequential,
    k_max,
    pvalue_matrix,
    single_step,
    step_down,
    unadjusted_pvalues,
)
from mtcov.core.panel import correlation_about_origin, vechs
from mtcov.core.resampler import generate_null
from mtcov.models.panel import CenteredPanel, Centering, HalfVec
from mtcov.models.testing import (
    Fdp,
    FdpSearch,
    KFwer,
    NullDistribution,
    ResamplingPlan,
    StepMode,
    TestSpec,
    Unadjusted,
)
from conftest import random_null


@pytest.fixture
def toy_null():
    """Four artificial samples of three statistics with distinct tie-breakers."""
    return NullDistribution(
        tilde_rho_abs=np.array(
            [
                [0.1, 0.2, 0.3],
                [0.4, 0.1, 0.2],
                [0.2, 0.5, 0.1],
                [0.3, 0.3, 0.6],
            ]
        ),
        uniforms=np.array([0.1, 0.2, 0.3, 0.4, 0.9]),
    )


@pytest.fixture
def toy_obs():
    """Observed |rho_hat| for the toy null."""
    return HalfVec(np.array([0.45, 0.25, 0.7]))


def _instance(rng, n_max=10, b_max=40):
    n = int(rng.integers(2, n_max + 1))
    b = int(rng.integers(5, b_max + 1))
    m = n * (n - 1) // 2
    obs = HalfVec(rng.integers(0, 9, size=m) / 8.0)
    return obs, random_null(rng, b, m)


class TestKMax:
    """Test cases for the k-th largest element."""

    def test_duplicates_counted(self):
        """Test that ties count with multiplicity."""
        assert k_max(np.array([3.0, 1.0, 3.0, 2.0]), 2) == 3.0
        assert k_max(np.array([3.0, 1.0, 3.0, 2.0]), 3) == 2.0

    def test_k_out_of_range(self):
        """Test that k above the length is refused."""
        with pytest.raises(ConfigurationError):
            k_max(np.array([1.0, 2.0]), 3)


class TestToyExample:
    """Hand-computed p-values on a three-hypothesis example."""

    def test_unadjusted(self, toy_obs, toy_null):
        """Test per-hypothesis Monte Carlo p-values."""
        result = unadjusted_pvalues(toy_obs, toy_null)
        np.testing.assert_array_equal(result.numerators, [1, 3, 1])
        np.testing.assert_allclose(result.values, [0.2, 0.6, 0.2])

    def test_single_step_fwer(self, toy_obs, toy_null):
        """Test single-step p-values against the row maxima."""
        result = single_step(toy_obs, toy_null, k=1)
        np.testing.assert_array_equal(result.numerators, [3, 5, 1])

    def test_single_step_two_fwer(self, toy_obs, toy_null):
        """Test single-step p-values against the second largest per row."""
        result = single_step(toy_obs, toy_null, k=2)
        np.testing.assert_array_equal(result.numerators, [1, 2, 1])

    def test_step_down_fwer(self, toy_obs, toy_null):
        """Test step-down p-values and their mapping back to vechs order."""
        result = step_down(toy_obs, toy_null, k=1)
        np.testing.assert_array_equal(result.numerators, [2, 3, 1])

    def test_rejections_at_level(self, toy_obs, toy_null):
        """Test that p <= alpha decides rejection with B = 5 and alpha = 0.2."""
        result = step_down(toy_obs, toy_null, k=1, alpha=0.2)
        np.testing.assert_array_equal(result.rejected, [False, False, True])
        assert result.n_rejected == 1

    def test_length_mismatch(self, toy_null):
        """Test that observed and null lengths must agree."""
        with pytest.raises(DimensionError):
            single_step(HalfVec(np.array([0.5])), toy_null, k=1)


class TestBoundaryIdentities:
    """Dominance and collapse properties on random instances."""

    def test_step_down_dominates_single_step(self, rng):
        """Test that step-down p-values never exceed single-step ones."""
        for _ in range(500):
            obs, null = _instance(rng)
            k = int(rng.integers(1, null.m + 1))
            sd = step_down(obs, null, k).numerators
            ss = single_step(obs, null, k).numerators
            assert np.all(sd <= ss)

    def test_equal_when_k_is_m(self, rng):
        """Test that both procedures coincide when k = M."""
        for _ in range(100):
            obs, null = _instance(rng)
            sd = step_down(obs, null, null.m).numerators
            ss = single_step(obs, null, null.m).numerators
            np.testing.assert_array_equal(sd, ss)

    def test_single_hypothesis_collapse(self, rng):
        """Test that with M = 1 every procedure equals the unadjusted p-value."""
        for _ in range(50):
            null = random_null(rng, 20, 1)
            obs = HalfVec(rng.integers(0, 9, size=1) / 8.0)
            expected = unadjusted_pvalues(obs, null).numerators
            np.testing.assert_array_equal(single_step(obs, null, 1).numerators, expected)
            np.testing.assert_array_equal(step_down(obs, null, 1).numerators, expected)

    def test_pvalues_within_support(self, rng):
        """Test that numerators lie in 1..B."""
        obs, null = _instance(rng)
        result = step_down(obs, null, 1)
        assert result.numerators.min() >= 1
        assert result.numerators.max() <= null.replications

    def test_rejections_nested_in_k(self, rng):
        """Test that a hypothesis rejected at k is rejected at every larger k."""
        for _ in range(50):
            obs, null = _instance(rng)
            alpha = 2.0 / null.replications
            for procedure in (single_step, step_down):
                previous = np.zeros(obs.m, dtype=bool)
                for k in range(1, obs.m + 1):
                    rejected = procedure(obs, null, k, alpha).rejected
                    assert np.all(rejected[previous])
                    previous = rejected

    def test_single_observation_gives_degenerate_null(self):
        """Test that T = 1, N = 2 makes every |rho~| one and p uniform on 1/B..1.

        Every sign pattern leaves a perfect correlation, so only the
        tie-breaking uniforms decide the rank.
        """
        panel = CenteredPanel(
            values=np.array([[0.5, -0.25]]),
            centering=Centering.KNOWN_LOCATION,
            location=np.zeros(2),
            asset_ids=("a", "b"),
        )
        obs = HalfVec(np.abs(vechs(correlation_about_origin(panel)).values))
        assert obs.values[0] == 1.0

        replications = 5
        counts = np.zeros(replications, dtype=int)
        for seed in range(500):
            null = generate_null(panel, ResamplingPlan(replications=replications, seed=seed, workers=1))
            np.testing.assert_array_equal(null.tilde_rho_abs, 1.0)
            counts[unadjusted_pvalues(obs, null).numerators[0] - 1] += 1
        assert stats.chisquare(counts).pvalue > 0.001


class TestFdp:
    """Test cases for FDP-adjusted p-values."""

    @pytest.fixture
    def strong_signal(self, rng):
        """Every observed statistic beats every artificial one; N = 10, B = 20."""
        null = NullDistribution(
            tilde_rho_abs=rng.random((19, 45)) * 0.5,
            uniforms=(np.arange(20) + 0.5) / 20,
        )
        return HalfVec(np.ones(45)), null

    def test_sequential_stops_at_last_passing_k(self, strong_signal):
        """Test k* = 4 when R_k = 45 for all k and gamma = 0.1."""
        obs, null = strong_signal
        result = fdp_sequential(obs, null, gamma=0.1)
        assert result.k_star == 4
        assert result.n_rejected == 45

    def test_bisection_matches_and_is_cheap(self, strong_signal):
        """Test that bisection finds the same k* within the evaluation budget."""
        obs, null = strong_signal
        sequential = fdp_sequential(obs, null, gamma=0.1)
        bisection = fdp_bisection(obs, null, gamma=0.1)
        assert bisection.k_star == sequential.k_star
        np.testing.assert_array_equal(bisection.numerators, sequential.numerators)
        assert bisection.evaluations <= math.ceil(math.log2(45)) + 2

    def test_gamma_zero_is_fwer(self, small_null):
        """Test that gamma = 0 returns the 1-FWER p-values."""
        obs = HalfVec(np.full(small_null.m, 0.3))
        result = fdp_sequential(obs, small_null, gamma=0.0)
        np.testing.assert_array_equal(result.numerators, step_down(obs, small_null, 1).numerators)
        assert result.k_star == 1

    def test_unavailable_when_rule_fails_at_one(self, small_null):
        """Test that too few rejections at k = 1 make FDP p-values unavailable."""
        obs = HalfVec(np.zeros(small_null.m))
        with pytest.raises(FdpUnavailableError) as excinfo:
            fdp_bisection(obs, small_null, gamma=0.1)
        assert excinfo.value.rejections == 0
        assert excinfo.value.gamma == 0.1

    def test_bisection_equivalence_on_random_instances(self, rng):
        """Test that both searches agree on 200 random instances."""
        for i in range(200):
            obs, null = _instance(rng)
            strong = rng.random(obs.m) < 0.7
            obs = HalfVec(np.where(strong, 1.0, obs.values))
            gamma = (0.0, 0.05, 0.1, 0.3)[i % 4]
            alpha = 2.0 / null.replications

            first = step_down(obs, null, 1, alpha)
            if gamma > 0 and not 1 <= gamma * (first.n_rejected + 1):
                with pytest.raises(FdpUnavailableError):
                    fdp_sequential(obs, null, gamma, alpha=alpha)
                with pytest.raises(FdpUnavailableError):
                    fdp_bisection(obs, null, gamma, alpha=alpha)
                continue

            sequential = fdp_sequential(obs, null, gamma, alpha=alpha)
            bisection = fdp_bisection(obs, null, gamma, alpha=alpha)
            assert bisection.k_star == sequential.k_star
            np.testing.assert_array_equal(bisection.numerators, sequential.numerators)
            bracket = math.ceil(math.log2(max(null.m, 2))) + 1
            assert bisection.evaluations <= sequential.evaluations + bracket

    def test_bisection_when_passing_k_skip_a_gap(self, rng):
        """Test a null where k = 2 fails but every k in 4..13 passes.

        Three entries of each artificial row sit at 0.9 and the rest at 0.1,
        so R_1 = R_2 = R_3 = 4 and R_k = 45 from k = 4 on; with gamma = 0.3
        the rule stops at k = 1.
        """
        simulated = np.full((19, 45), 0.1)
        for row in simulated:
            row[rng.choice(45, size=3, replace=False)] = 0.9
        null = NullDistribution(
            tilde_rho_abs=simulated,
            uniforms=(np.arange(20) + 0.5) / 20,
        )
        obs = HalfVec(np.concatenate([np.ones(4), np.full(41, 0.5)]))

        sequential = fdp_sequential(obs, null, gamma=0.3)
        bisection = fdp_bisection(obs, null, gamma=0.3)
        assert sequential.k_star == 1
        assert sequential.n_rejected == 4
        assert bisection.k_star == 1
        np.testing.assert_array_equal(bisection.numerators, sequential.numerators)

        spec = TestSpec(criterion=Fdp(gamma=0.3), replications=20, alpha=0.05)
        assert spec.fdp_search is FdpSearch.SEQUENTIAL
        assert adjust(obs, null, spec).n_rejected == 4


class TestAdjust:
    """Test cases for the procedure dispatcher."""

    def test_replication_mismatch(self, small_null):
        """Test that B must match the null distribution."""
        spec = TestSpec(replications=100, alpha=0.05)
        with pytest.raises(ConfigurationError):
            adjust(HalfVec(np.zeros(small_null.m)), small_null, spec)

    def test_heuristic_k_resolved(self, small_null):
        """Test that k = sqrt resolves to floor(sqrt(M)) = 3 for M = 10."""
        spec = TestSpec(criterion=KFwer(k="sqrt"), replications=40, alpha=0.05)
        result = adjust(HalfVec(np.full(small_null.m, 0.2)), small_null, spec)
        assert result.k == 3
        assert result.spec == spec

    def test_single_step_mode(self, small_null):
        """Test that mode ss dispatches to the single-step procedure."""
        obs = HalfVec(np.linspace(0.0, 0.9, small_null.m))
        spec = TestSpec(mode=StepMode.SINGLE_STEP, replications=40, alpha=0.05)
        np.testing.assert_array_equal(
            adjust(obs, small_null, spec).numerators, single_step(obs, small_null, 1).numerators
        )

    def test_unadjusted_criterion(self, small_null):
        """Test that the unadjusted criterion skips multiplicity control."""
        obs = HalfVec(np.linspace(0.0, 0.9, small_null.m))
        spec = TestSpec(criterion=Unadjusted(), replications=40, alpha=0.05)
        np.testing.assert_array_equal(
            adjust(obs, small_null, spec).numerators, unadjusted_pvalues(obs, small_null).numerators
        )

    def test_fdp_sequential_search(self, small_null):
        """Test that the FDP criterion honours the search setting."""
        obs = HalfVec(np.ones(small_null.m))
        spec = TestSpec(
            criterion=Fdp(gamma=0.3),
            fdp_search=FdpSearch.SEQUENTIAL,
            replications=40,
            alpha=0.05,
        )
        result = adjust(obs, small_null, spec)
        assert result.k_star == 3
        assert result.evaluations == 4

    def test_pvalue_matrix(self, toy_obs, toy_null):
        """Test the dense p-value matrix with zero diagonal."""
        matrix = pvalue_matrix(step_down(toy_obs, toy_null, 1))
        np.testing.assert_array_equal(np.diag(matrix.entries), 0.0)
        np.testing.assert_allclose(matrix.entries[1, 0], 0.4)
        np.testing.assert_allclose(matrix.entries[2, 1], 0.2)
        np.testing.assert_array_equal(matrix.entries, matrix.entries.T)
