"""Click-counting detection theory for D multiplexed on-off detectors.

Holds the histogram containers, exact click distributions for a few reference
sources and the estimator that turns click statistics into normally ordered
moments ``G^(m) = <:pi^m:>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np

from .estimator import covariance_from_frequencies, moment_weights

__all__ = [
    "ClickHistogram",
    "JointClickHistogram",
    "SymmetricMomentVector",
    "JointMomentTable",
    "SourceModel",
    "exact_click_distribution",
    "mixture_click_distribution",
    "analytic_moments",
    "moments_from_distribution",
    "moments_from_histogram",
    "joint_moments_from_histogram",
    "sample_click_histogram",
]


@dataclass(frozen=True)
class ClickHistogram:
    """Counts of total click numbers 0..D over ``trials`` recorded trials."""

    detector_count: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if self.detector_count < 1:
            raise ValueError("detector_count must be positive")
        if counts.shape != (self.detector_count + 1,):
            raise ValueError(
                f"expected {self.detector_count + 1} counts, got shape {counts.shape}"
            )
        if (counts < 0).any():
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def trials(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        if self.trials == 0:
            raise ValueError("histogram has no trials")
        return self.counts / self.trials

    @classmethod
    def from_click_numbers(cls, clicks: Sequence[int], detector_count: int) -> "ClickHistogram":
        clicks = np.asarray(clicks, dtype=np.int64)
        if clicks.size and (clicks.min() < 0 or clicks.max() > detector_count):
            raise ValueError("click numbers outside [0, D]")
        return cls(detector_count, np.bincount(clicks, minlength=detector_count + 1))

    def __add__(self, other: "ClickHistogram") -> "ClickHistogram":
        if other.detector_count != self.detector_count:
            raise ValueError("cannot merge histograms with different detector counts")
        return ClickHistogram(self.detector_count, self.counts + other.counts)


@dataclass(frozen=True)
class JointClickHistogram:
    """Joint click counts C(n_A, n_B) for two detector groups."""

    detector_count_a: int
    detector_count_b: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        shape = (self.detector_count_a + 1, self.detector_count_b + 1)
        if counts.shape != shape:
            raise ValueError(f"expected counts of shape {shape}, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def trials(self) -> int:
        return int(self.counts.sum())

    def marginal(self, arm: str) -> ClickHistogram:
        if arm == "A":
            return ClickHistogram(self.detector_count_a, self.counts.sum(axis=1))
        if arm == "B":
            return ClickHistogram(self.detector_count_b, self.counts.sum(axis=0))
        raise ValueError(f"arm must be 'A' or 'B', got {arm!r}")

    def __add__(self, other: "JointClickHistogram") -> "JointClickHistogram":
        if other.counts.shape != self.counts.shape:
            raise ValueError("cannot merge joint histograms of different shapes")
        return JointClickHistogram(
            self.detector_count_a, self.detector_count_b, self.counts + other.counts
        )


@dataclass(frozen=True)
class SymmetricMomentVector:
    """Estimated moments G^(0..max_order) with their covariance."""

    values: np.ndarray
    covariance: np.ndarray
    trials: int = 0

    @property
    def max_order(self) -> int:
        return len(self.values) - 1


@dataclass(frozen=True)
class JointMomentTable:
    """Two-group moments G^(m_A, m_B).

    ``frequencies`` and the two weight matrices are kept so the eigenvalue error
    can be propagated straight from the click distribution.
    """

    values: np.ndarray
    trials: int
    frequencies: Optional[np.ndarray] = field(default=None, repr=False)
    weights_a: Optional[np.ndarray] = field(default=None, repr=False)
    weights_b: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class SourceModel:
    """Reference light source seen through D uniformly multiplexed detectors.

    ``kind`` is one of ``fock``, ``coherent`` or ``thermal``.  For ``fock`` the
    ``photons`` field is the integer photon number, otherwise it is the mean.
    """

    kind: str
    photons: float
    efficiency: float = 1.0
    background: float = 0.0
    schmidt_modes: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fock", "coherent", "thermal"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.photons < 0:
            raise ValueError("photon number / mean must be nonnegative")
        if self.kind == "fock" and int(self.photons) != self.photons:
            raise ValueError("fock photon number must be an integer")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency {self.efficiency} outside [0, 1]")
        if not 0.0 <= self.background < 1.0:
            raise ValueError(f"background click probability {self.background} outside [0, 1)")
        if self.schmidt_modes <= 0:
            raise ValueError("schmidt_modes must be positive")

    @classmethod
    def fock(cls, n: int, efficiency: float = 1.0, background: float = 0.0) -> "SourceModel":
        return cls("fock", n, efficiency, background)

    @classmethod
    def coherent(cls, mean_photons: float, efficiency: float = 1.0, background: float = 0.0) -> "SourceModel":
        return cls("coherent", mean_photons, efficiency, background)

    @classmethod
    def thermal(
        cls, mean_photons: float, schmidt_modes: float = 1.0, efficiency: float = 1.0,
        background: float = 0.0,
    ) -> "SourceModel":
        return cls("thermal", mean_photons, efficiency, background, schmidt_modes)


def _silent_probability(model: SourceModel, s: int, d: int):
    """Probability that a fixed set of ``s`` detectors stays silent (mpmath)."""
    eta = mpmath.mpf(model.efficiency)
    frac = eta * s / d
    if model.kind == "fock":
        q = (1 - frac) ** int(model.photons)
    elif model.kind == "coherent":
        q = mpmath.exp(-frac * mpmath.mpf(model.photons))
    else:
        mu = mpmath.mpf(model.schmidt_modes)
        q = (1 + frac * mpmath.mpf(model.photons) / mu) ** (-mu)
    return (1 - mpmath.mpf(model.background)) ** s * q


def _working_precision(d: int) -> int:
    # alternating sums reach binom(D,n) binom(n,k) <= 3**D before cancelling
    return 30 + int(d * math.log10(3)) + 5


def exact_click_distribution(model: SourceModel, detector_count: int) -> np.ndarray:
    """Click-number distribution c(n) = <Pi_n>, n = 0..D.

    Inclusion-exclusion over silent detector subsets, evaluated in extended
    precision since the alternating terms grow like 3**D.
    """
    d = int(detector_count)
    if d < 1:
        raise ValueError("detector_count must be >= 1")
    with mpmath.workdps(_working_precision(d)):
        silent = [_silent_probability(model, s, d) for s in range(d + 1)]
        out = np.empty(d + 1)
        for n in range(d + 1):
            acc = mpmath.mpf(0)
            for k in range(n + 1):
                term = math.comb(n, k) * silent[d - n + k]
                acc += -term if k % 2 else term
            out[n] = float(math.comb(d, n) * acc)
    # tiny negative values are rounding residue of exact zeros
    out[out < 0] = 0.0
    return out


def mixture_click_distribution(
    models: Sequence[SourceModel], weights: Sequence[float], detector_count: int
) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if len(models) != len(weights) or (weights < 0).any():
        raise ValueError("need one nonnegative weight per model")
    weights = weights / weights.sum()
    return sum(w * exact_click_distribution(m, detector_count) for m, w in zip(models, weights))


def analytic_moments(model: SourceModel, detector_count: int, max_order: int) -> np.ndarray:
    """<:pi^m:> computed as the probability that m fixed detectors all click.

    This bypasses the click distribution entirely and is used to cross-check
    the estimator.
    """
    d = int(detector_count)
    if not 0 <= max_order <= d:
        raise ValueError("max_order must lie in [0, D]")
    with mpmath.workdps(_working_precision(d)):
        silent = [_silent_probability(model, s, d) for s in range(max_order + 1)]
        out = np.empty(max_order + 1)
        for m in range(max_order + 1):
            acc = mpmath.mpf(0)
            for k in range(m + 1):
                term = math.comb(m, k) * silent[k]
                acc += -term if k % 2 else term
            out[m] = float(acc)
    return np.clip(out, 0.0, 1.0)


def moments_from_distribution(dist: Sequence[float], max_order: int) -> np.ndarray:
    dist = np.asarray(dist, dtype=float)
    return moment_weights(len(dist) - 1, max_order) @ dist


def moments_from_histogram(hist: ClickHistogram, max_order: int) -> SymmetricMomentVector:
    """Unbiased estimate of G^(0..max_order) with its multinomial covariance."""
    d = hist.detector_count
    if max_order > d:
        raise ValueError(f"max_order {max_order} exceeds detector count {d}")
    if hist.trials == 0:
        raise ValueError("histogram has no trials")
    w = moment_weights(d, max_order)
    freqs = hist.frequencies()
    values = w @ freqs
    values[0] = 1.0
    cov = covariance_from_frequencies(w, freqs, hist.trials)
    return SymmetricMomentVector(values=values, covariance=cov, trials=hist.trials)


def joint_moments_from_histogram(hist: JointClickHistogram, max_a: int, max_b: int) -> JointMomentTable:
    if max_a > hist.detector_count_a or max_b > hist.detector_count_b:
        raise ValueError(
            f"orders ({max_a}, {max_b}) exceed detector counts "
            f"({hist.detector_count_a}, {hist.detector_count_b})"
        )
    if hist.trials == 0:
        raise ValueError("histogram has no trials")
    wa = moment_weights(hist.detector_count_a, max_a)
    wb = moment_weights(hist.detector_count_b, max_b)
    freqs = hist.counts / hist.trials
    values = wa @ freqs @ wb.T
    values[0, 0] = 1.0
    return JointMomentTable(values=values, trials=hist.trials, frequencies=freqs, weights_a=wa, weights_b=wb)


def sample_click_histogram(
    model: SourceModel, detector_count: int, trials: int, rng: np.random.Generator
) -> ClickHistogram:
    """Multinomial draw of ``trials`` click numbers from the exact distribution."""
    dist = exact_click_distribution(model, detector_count)
    return ClickHistogram(detector_count, rng.multinomial(trials, dist / dist.sum()))
