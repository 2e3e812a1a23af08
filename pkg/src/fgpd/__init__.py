"""Fake generated painting detection from Fourier-spectrum features."""

__version__ = "0.1.0"
