"""Binomial weight tables shared by the moment estimator and its covariance."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np


@lru_cache(maxsize=64)
def _weight_table(detector_count: int) -> np.ndarray:
    d = detector_count
    w = np.zeros((d + 1, d + 1))
    for m in range(d + 1):
        denom = comb(d, m)
        for n in range(m, d + 1):
            # exact ratio first; comb(128, 64) is far beyond float's integer range
            w[m, n] = float(Fraction(comb(n, m), denom))
    w.flags.writeable = False
    return w


def moment_weights(detector_count: int, max_order: int) -> np.ndarray:
    """Matrix ``W[m, n] = binom(n, m) / binom(D, m)`` for m <= max_order.

    ``binom(n, m)`` is zero whenever m > n.
    """
    if detector_count < 1:
        raise ValueError(f"detector count must be positive, got {detector_count}")
    if not 0 <= max_order <= detector_count:
        raise ValueError(f"max_order {max_order} outside [0, {detector_count}]")
    return _weight_table(detector_count)[: max_order + 1]


def covariance_from_frequencies(weights: np.ndarray, freqs: np.ndarray, trials: int) -> np.ndarray:
    """Multinomial delta-method covariance of ``weights @ freqs``."""
    if trials <= 0:
        raise ValueError("covariance needs at least one trial")
    g = weights @ freqs
    second = (weights * freqs) @ weights.T
    cov = (second - np.outer(g, g)) / trials
    cov = 0.5 * (cov + cov.T)
    # variances are differences of nearly equal numbers for tiny moments
    idx = np.diag_indices_from(cov)
    cov[idx] = np.maximum(cov[idx], 0.0)
    return cov
