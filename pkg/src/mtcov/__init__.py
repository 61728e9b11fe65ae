"""mtcov: covariance regularization by Monte Carlo multiple testing of return correlations."""

__version__ = "0.1.0"
