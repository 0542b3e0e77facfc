"""Exact multifractional Brownian motion simulation and local Hurst estimators."""

__version__ = "0.1.0"
