"""Numerical toolkit for r_L-density, variational principles and monotone polars."""

__version__ = "0.1.0"
