"""Unit tests for CSV, JSON and null distribution files."""

import json
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from mtcov.core.exceptions import DimensionError, ParseError
from mtcov.models.panel import MatrixKind, SymmetricMatrix
from mtcov.models.testing import AdjustedPValues, ResamplingPlan, TestSpec
from mtcov.utils.csv_handler import (
    read_matrix_csv,
    read_returns_csv,
    write_matrix_csv,
    write_table_csv,
)
from mtcov.utils.json_report import pvalue_report, write_json
from mtcov.utils.null_dump import cached_null, load_null, panel_digest, save_null


class TestReadReturnsCsv:
    """Test cases for read_returns_csv."""

    def test_round_trip(self, returns_csv, small_panel):
        """Test that a written panel reads back unchanged."""
        panel = read_returns_csv(returns_csv)
        assert panel.asset_ids == small_panel.asset_ids
        assert panel.timestamps == small_panel.timestamps
        np.testing.assert_array_equal(panel.observations, small_panel.observations)

    def test_bundled_sample(self, sample_returns_path):
        """Test that the bundled sample panel parses."""
        panel = read_returns_csv(sample_returns_path)
        assert panel.n_assets == 10
        assert panel.n_obs == 300

    def test_non_numeric_cell_coordinates(self, tmp_path):
        """Test that a bad cell is reported with its line and column."""
        path = tmp_path / "bad.csv"
        path.write_text("date,a,b\n2020-01-01,0.1,0.2\n2020-01-02,0.3,oops\n")
        with pytest.raises(ParseError) as excinfo:
            read_returns_csv(path)
        assert excinfo.value.row == 3
        assert excinfo.value.column == "b"

    def test_empty_cell(self, tmp_path):
        """Test that a missing value is a parse error."""
        path = tmp_path / "gap.csv"
        path.write_text("date,a,b\n2020-01-01,,0.2\n2020-01-02,0.3,0.1\n")
        with pytest.raises(ParseError) as excinfo:
            read_returns_csv(path)
        assert excinfo.value.row == 2
        assert excinfo.value.column == "a"

    def test_missing_date_column(self, tmp_path):
        """Test that the first column must be the date."""
        path = tmp_path / "nodate.csv"
        path.write_text("a,b,c\n0.1,0.2,0.3\n0.2,0.1,0.0\n")
        with pytest.raises(ParseError):
            read_returns_csv(path)

    def test_unsorted_dates(self, tmp_path):
        """Test that dates must increase."""
        path = tmp_path / "order.csv"
        path.write_text("date,a,b\n2020-01-02,0.1,0.2\n2020-01-01,0.3,0.1\n")
        with pytest.raises(ParseError) as excinfo:
            read_returns_csv(path)
        assert excinfo.value.row == 3

    def test_single_asset(self, tmp_path):
        """Test that one asset column is not enough."""
        path = tmp_path / "one.csv"
        path.write_text("date,a\n2020-01-01,0.1\n2020-01-02,0.3\n")
        with pytest.raises(DimensionError):
            read_returns_csv(path)

    def test_missing_file(self, tmp_path):
        """Test that a missing file is a parse error."""
        with pytest.raises(ParseError):
            read_returns_csv(tmp_path / "absent.csv")

    @patch("mtcov.utils.csv_handler.logger")
    def test_logs_shape(self, mock_logger, returns_csv):
        """Test that reading logs the panel shape."""
        read_returns_csv(returns_csv)
        mock_logger.info.assert_called_once()
        assert "60 observations of 5 assets" in mock_logger.info.call_args[0][0]


class TestWriters:
    """Test cases for the CSV writers."""

    def test_matrix_round_trip(self, tmp_path):
        """Test that matrices are written at full precision."""
        matrix = SymmetricMatrix(np.array([[1.0, 1 / 3], [1 / 3, 1.0]]), MatrixKind.CORRELATION)
        path = tmp_path / "m.csv"
        write_matrix_csv(matrix, ("x", "y"), path)
        frame = read_matrix_csv(path)
        assert list(frame.columns) == ["x", "y"]
        assert frame.loc["y", "x"] == 1 / 3

    def test_matrix_ids_checked(self, tmp_path):
        """Test that the id count must match the matrix."""
        matrix = SymmetricMatrix(np.eye(2), MatrixKind.CORRELATION)
        with pytest.raises(DimensionError):
            write_matrix_csv(matrix, ("x",), tmp_path / "m.csv")

    def test_table_column_order(self, tmp_path):
        """Test that tables keep the given column order and blank missing values."""
        path = tmp_path / "t.csv"
        write_table_csv([{"b": 2.0, "a": 1}, {"a": 3}], ["a", "b"], path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["a", "b"]
        assert frame["b"].isna().iloc[1]

    def test_json_is_sorted_and_plain(self, tmp_path):
        """Test numpy conversion, NaN mapping and stable key order."""
        path = tmp_path / "r.json"
        write_json({"z": np.int64(2), "a": np.array([0.5, np.nan])}, path)
        text = path.read_text()
        assert text.index('"a"') < text.index('"z"')
        assert json.loads(text) == {"a": [0.5, None], "z": 2}

    def test_pvalue_report_pairs(self):
        """Test that every p-value is labelled with its asset pair."""
        spec = TestSpec(replications=20, alpha=0.05)
        pvalues = AdjustedPValues(np.array([1, 10, 20]), 20, 0.05, spec=spec, k=1)
        report = pvalue_report(pvalues, ("x", "y", "z"))
        assert report["procedure"] == "SD"
        assert [(p["row"], p["column"]) for p in report["pairs"]] == [("y", "x"), ("z", "x"), ("z", "y")]
        assert report["pairs"][0]["rejected"] is True
        assert report["n_rejected"] == 1


class TestNullDump:
    """Test cases for binary null distribution files."""

    def test_save_and_load(self, tmp_path, centered_panel, small_null):
        """Test that a dump restores the same draws, seed and digest."""
        path = tmp_path / "null.bin"
        digest = panel_digest(centered_panel)
        save_null(small_null, 11, digest, path)
        null, seed, stored = load_null(path)
        assert seed == 11
        assert stored == digest
        np.testing.assert_array_equal(null.tilde_rho_abs, small_null.tilde_rho_abs)
        np.testing.assert_array_equal(null.uniforms, small_null.uniforms)

    def test_truncated_file(self, tmp_path, centered_panel, small_null):
        """Test that a truncated dump is a parse error."""
        path = tmp_path / "null.bin"
        save_null(small_null, 11, panel_digest(centered_panel), path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ParseError):
            load_null(path)

    def test_wrong_magic(self, tmp_path):
        """Test that other files are not mistaken for dumps."""
        path = tmp_path / "null.bin"
        path.write_bytes(b"x" * 100)
        with pytest.raises(ParseError):
            load_null(path)

    def test_cached_null_reused(self, tmp_path, centered_panel):
        """Test that a matching dump is reused instead of regenerated."""
        path = tmp_path / "null.bin"
        plan = ResamplingPlan(replications=20, seed=4, workers=1)
        first = cached_null(centered_panel, plan, path)
        with patch("mtcov.utils.null_dump.generate_null") as mock_generate:
            second = cached_null(centered_panel, plan, path)
        mock_generate.assert_not_called()
        np.testing.assert_array_equal(first.tilde_rho_abs, second.tilde_rho_abs)

    def test_cached_null_regenerated_for_other_seed(self, tmp_path, centered_panel):
        """Test that a dump from another seed is replaced."""
        path = tmp_path / "null.bin"
        cached_null(centered_panel, ResamplingPlan(replications=20, seed=4, workers=1), path)
        cached_null(centered_panel, ResamplingPlan(replications=20, seed=5, workers=1), path)
        _, seed, _ = load_null(path)
        assert seed == 5
