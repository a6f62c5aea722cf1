"""Denoising random forests: regression forests that repair noise-corrupted traversal paths."""

__version__ = "0.1.0"
