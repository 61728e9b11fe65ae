"""Shared pytest fixtures and configuration."""

from pathlib import Path

import numpy as np
import pytest

from mtcov.core.panel import center
from mtcov.core.resampler import generate_null
from mtcov.models.panel import ReturnsPanel
from mtcov.models.testing import NullDistribution, ResamplingPlan

SAMPLE_RETURNS = Path(__file__).resolve().parent.parent / "data" / "sample_returns.csv"


def make_panel(n_obs: int, n_assets: int, seed: int = 0, loading: float = 0.0) -> ReturnsPanel:
    """Gaussian returns with an optional common factor."""
    rng = np.random.default_rng(seed)
    factor = rng.standard_normal((n_obs, 1))
    values = 0.01 * (rng.standard_normal((n_obs, n_assets)) + loading * factor)
    return ReturnsPanel(
        observations=values,
        asset_ids=tuple(f"A{i}" for i in range(n_assets)),
        timestamps=tuple(f"{t:05d}" for t in range(n_obs)),
    )


def random_null(rng: np.random.Generator, replications: int, m: int) -> NullDistribution:
    """Null distribution with coarse values so that exact ties occur."""
    return NullDistribution(
        tilde_rho_abs=rng.integers(0, 8, size=(replications - 1, m)) / 8.0,
        uniforms=rng.permutation(replications) / replications + 0.5 / replications,
    )


@pytest.fixture
def rng():
    """Provide a seeded generator."""
    return np.random.default_rng(8032)


@pytest.fixture
def small_panel():
    """Provide a 60 x 5 panel with one common factor."""
    return make_panel(60, 5, seed=1, loading=1.0)


@pytest.fixture
def centered_panel(small_panel):
    """Provide the small panel centered at its sample mean."""
    return center(small_panel)


@pytest.fixture
def small_null(centered_panel):
    """Provide a B = 40 null distribution for the small panel."""
    return generate_null(centered_panel, ResamplingPlan(replications=40, seed=11, workers=1))


@pytest.fixture
def sample_returns_path():
    """Provide the bundled 10-asset sample panel."""
    return SAMPLE_RETURNS


@pytest.fixture
def returns_csv(tmp_path, small_panel):
    """Write the small panel to a CSV file."""
    from mtcov.utils.csv_handler import write_returns_csv

    path = tmp_path / "returns.csv"
    write_returns_csv(small_panel, path)
    return path
