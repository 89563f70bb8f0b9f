"""Moments, deviations and fluctuations of tridiagonal random matrix ensembles."""

__version__ = "0.1.0"
