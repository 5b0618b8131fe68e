"""Exact simulation and spectral analysis of long-range one-dimensional quantum walks."""

__version__ = "0.1.0"
