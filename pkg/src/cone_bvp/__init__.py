"""Positive solutions of one-dimensional phi-Laplacian systems via a cone fixed-point operator."""

__version__ = "0.1.0"
