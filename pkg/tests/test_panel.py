"""Unit tests for panels, centering and half-vectorization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mtcov.core.exceptions import DegenerateColumnError, DimensionError, NumericalError
from mtcov.core.panel import (
    center,
    correlation_about_origin,
    fill,
    vechs,
    vechs_indices,
)
from mtcov.models.panel import (
    Centering,
    HalfVec,
    MatrixKind,
    ReturnsPanel,
    SymmetricMatrix,
)


def _panel(values, ids=None):
    values = np.asarray(values, dtype=float)
    return ReturnsPanel(
        observations=values,
        asset_ids=ids or tuple(f"A{i}" for i in range(values.shape[1])),
        timestamps=tuple(f"{t:03d}" for t in range(values.shape[0])),
    )


class TestReturnsPanel:
    """Test cases for ReturnsPanel validation."""

    def test_rejects_single_asset(self):
        """Test that a one-column panel is refused."""
        with pytest.raises(DimensionError):
            _panel([[0.1], [0.2]])

    def test_rejects_non_finite(self):
        """Test that NaN returns are refused."""
        with pytest.raises(DimensionError):
            _panel([[0.1, np.nan], [0.2, 0.3]])

    def test_rejects_unsorted_timestamps(self):
        """Test that timestamps must increase."""
        with pytest.raises(DimensionError):
            ReturnsPanel(
                observations=np.zeros((2, 2)) + 0.1,
                asset_ids=("a", "b"),
                timestamps=("2", "1"),
            )

    def test_observations_are_read_only(self):
        """Test that the stored returns cannot be mutated."""
        panel = _panel([[0.1, 0.2], [0.3, 0.4]])
        with pytest.raises(ValueError):
            panel.observations[0, 0] = 1.0

    def test_rows_slices_timestamps(self):
        """Test that a row window keeps its labels."""
        panel = _panel(np.arange(12.0).reshape(4, 3) + 1.0)
        window = panel.rows(1, 3)
        assert window.timestamps == ("001", "002")
        np.testing.assert_array_equal(window.observations, panel.observations[1:3])


class TestCenter:
    """Test cases for centering."""

    def test_sample_mean_centering(self):
        """Test that sample-mean centering zeroes column means."""
        panel = _panel([[1.0, 2.0], [3.0, 6.0]])
        centered = center(panel)
        np.testing.assert_allclose(centered.values.mean(axis=0), 0.0)
        np.testing.assert_allclose(centered.location, [2.0, 4.0])
        assert centered.centering is Centering.SAMPLE_MEAN

    def test_known_location(self):
        """Test that a known location is subtracted as given."""
        panel = _panel([[1.0, 2.0], [3.0, 6.0]])
        centered = center(panel, Centering.KNOWN_LOCATION, np.array([1.0, 1.0]))
        np.testing.assert_allclose(centered.values, [[0.0, 1.0], [2.0, 5.0]])

    def test_known_location_defaults_to_zero(self):
        """Test that a missing location leaves the returns unchanged."""
        panel = _panel([[1.0, 2.0], [3.0, 6.0]])
        centered = center(panel, Centering.KNOWN_LOCATION)
        np.testing.assert_array_equal(centered.values, panel.observations)

    def test_location_length_checked(self):
        """Test that a location of the wrong length is refused."""
        panel = _panel([[1.0, 2.0], [3.0, 6.0]])
        with pytest.raises(DimensionError):
            center(panel, Centering.KNOWN_LOCATION, np.zeros(3))


class TestCorrelationAboutOrigin:
    """Test cases for correlations from uncentered second moments."""

    def test_perfectly_correlated_columns(self):
        """Test that proportional columns have correlation one."""
        panel = center(_panel([[1.0, 2.0], [-1.0, -2.0], [2.0, 4.0], [-2.0, -4.0]]))
        gamma = correlation_about_origin(panel)
        assert gamma.entries[0, 1] == pytest.approx(1.0)
        assert gamma.kind is MatrixKind.CORRELATION

    def test_uses_second_moments_about_origin(self):
        """Test the formula on a centered panel with known moments."""
        values = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])
        gamma = correlation_about_origin(center(_panel(values), Centering.KNOWN_LOCATION))
        assert gamma.entries[0, 1] == pytest.approx(0.0)
        np.testing.assert_array_equal(np.diag(gamma.entries), [1.0, 1.0])

    def test_zero_column_is_degenerate(self):
        """Test that a zero column names the offending asset."""
        values = np.array([[1.0, 0.0], [-1.0, 0.0]])
        panel = center(_panel(values, ("x", "flat")), Centering.KNOWN_LOCATION)
        with pytest.raises(DegenerateColumnError) as excinfo:
            correlation_about_origin(panel)
        assert excinfo.value.asset_id == "flat"

    def test_entries_bounded(self, centered_panel):
        """Test that all correlations lie in [-1, 1]."""
        gamma = correlation_about_origin(centered_panel)
        assert np.all(np.abs(gamma.entries) <= 1.0)


class TestVechs:
    """Test cases for strict half-vectorization."""

    def test_order_is_column_by_column(self):
        """Test the documented ordering (2,1),(3,1),(3,2) for N = 3."""
        rows, cols = vechs_indices(3)
        assert list(zip(rows.tolist(), cols.tolist(), strict=True)) == [(1, 0), (2, 0), (2, 1)]

    def test_order_for_four_assets(self):
        """Test that N = 4 yields (2,1),(3,1),(4,1),(3,2),(4,2),(4,3)."""
        rows, cols = vechs_indices(4)
        pairs = list(zip((rows + 1).tolist(), (cols + 1).tolist(), strict=True))
        assert pairs == [(2, 1), (3, 1), (4, 1), (3, 2), (4, 2), (4, 3)]

    def test_halfvec_rejects_bad_length(self):
        """Test that lengths not of the form N(N-1)/2 are refused."""
        with pytest.raises(DimensionError):
            HalfVec(np.zeros(4))

    def test_fill_sets_diagonal(self):
        """Test that fill with diagonal 0 builds a p-value style matrix."""
        matrix = fill(HalfVec(np.array([0.1, 0.2, 0.3])), diagonal=0.0)
        np.testing.assert_array_equal(np.diag(matrix.entries), 0.0)
        assert matrix.entries[2, 1] == matrix.entries[1, 2] == 0.3

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(min_value=2, max_value=9).flatmap(
            lambda n: arrays(
                np.float64,
                n * (n - 1) // 2,
                elements=st.floats(-1.0, 1.0, allow_nan=False),
            )
        )
    )
    def test_fill_then_vechs_is_identity(self, values):
        """Test that vechs inverts fill for any admissible vector."""
        np.testing.assert_array_equal(vechs(fill(HalfVec(values))).values, values)


class TestSymmetricMatrix:
    """Test cases for SymmetricMatrix."""

    def test_symmetric_from_upper_triangle(self):
        """Test that the lower triangle mirrors the upper one."""
        matrix = SymmetricMatrix(np.array([[1.0, 0.5], [9.0, 1.0]]), MatrixKind.CORRELATION)
        assert matrix.entries[1, 0] == 0.5

    def test_correlation_diagonal_must_be_one(self):
        """Test that a correlation matrix needs a unit diagonal."""
        with pytest.raises(NumericalError):
            SymmetricMatrix(np.array([[2.0, 0.0], [0.0, 1.0]]), MatrixKind.CORRELATION)

    def test_correlation_entries_bounded(self):
        """Test that correlation entries above one are refused."""
        with pytest.raises(NumericalError):
            SymmetricMatrix(np.array([[1.0, 1.5], [1.5, 1.0]]), MatrixKind.CORRELATION)
