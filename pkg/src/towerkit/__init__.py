"""Exact homological algebra for towers, completions and spectral sequences."""

__version__ = "0.1.0"
