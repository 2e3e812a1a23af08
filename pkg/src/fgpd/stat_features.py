"""Four-moment summary of a normalized spectrum."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .spectrum import Spectrum

# below this the spectrum is treated as constant
DEGENERATE_STD = 1e-12


class StatFeature(NamedTuple):
    mean: float
    std: float
    skewness: float
    kurtosis: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def flatten(spec: Spectrum | np.ndarray) -> np.ndarray:
    data = spec.data if isinstance(spec, Spectrum) else np.asarray(spec)
    return np.asarray(data, dtype=float).ravel(order="C")


def statistical_feature(values) -> StatFeature:
    """Mean, sample standard deviation, skewness and excess kurtosis.

    The standard deviation uses the L-1 divisor while the third and fourth
    central moments are averaged over L, and both are standardized by that
    same sample deviation. A constant vector gets skewness = kurtosis = 0.
    """
    s = np.asarray(values, dtype=float).ravel()
    n = s.size
    if n < 2:
        raise ValueError(f"need at least 2 values, got {n}")
    mean = s.sum() / n
    dev = s - mean
    sq = dev * dev
    std = np.sqrt(sq.sum() / (n - 1))
    if std < DEGENERATE_STD:
        return StatFeature(float(mean), float(std), 0.0, 0.0)
    skew = (sq * dev).sum() / n / std**3
    kurt = (sq * sq).sum() / n / std**4 - 3.0
    return StatFeature(float(mean), float(std), float(skew), float(kurt))
