"""Monte Carlo model of the heralded time-multiplexed experiment.

Per trial a multimode-thermal number of photon pairs is drawn.  Every signal
and idler photon is placed uniformly over its arm's ``network_bins`` detection
bins and survives with the bin's efficiency; independent background clicks are
OR-ed in per bin.  A bin clicks if anything arrived.

Trials are processed in fixed-size chunks, each with its own generator seeded
from ``(rng_seed, chunk index)``, so results do not depend on how chunks are
scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .click_counting import JointClickHistogram
from .config import ExperimentConfig

__all__ = [
    "SinglesProfile",
    "TrialOutcome",
    "SimulationRun",
    "CHUNK_TRIALS",
    "bin_efficiencies",
    "sample_pair_number",
    "simulate_trials",
    "run_simulation",
    "iter_trial_outcomes",
    "pulse_sigma_schedule",
    "synthesize_timetags",
    "timetag_stream",
]

CHUNK_TRIALS = 1 << 16
_JITTER_STREAM = 0x5EED


@dataclass(frozen=True)
class SinglesProfile:
    """Click counts per physical detection bin: arm A bins, then arm B bins."""

    counts: np.ndarray
    network_bins: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (2 * self.network_bins,):
            raise ValueError(f"expected {2 * self.network_bins} singles, got {counts.shape}")
        object.__setattr__(self, "counts", counts)

    def arm(self, arm: int) -> np.ndarray:
        return self.counts[arm * self.network_bins:(arm + 1) * self.network_bins]

    def __add__(self, other: "SinglesProfile") -> "SinglesProfile":
        return SinglesProfile(self.counts + other.counts, self.network_bins)


@dataclass(frozen=True)
class TrialOutcome:
    clicked_a: frozenset
    clicked_b: frozenset

    @property
    def n_a(self) -> int:
        return len(self.clicked_a)

    @property
    def n_b(self) -> int:
        return len(self.clicked_b)


@dataclass
class _ArmClicks:
    # keys are trial * network_bins + bin, sorted and unique within each array
    photon: np.ndarray
    background: np.ndarray

    def clicked(self) -> np.ndarray:
        return np.union1d(self.photon, self.background)


@dataclass
class _Chunk:
    index: int
    start: int
    trials: int
    arms: tuple


@dataclass
class SimulationRun:
    config: ExperimentConfig
    joint: JointClickHistogram
    singles: SinglesProfile
    chunks: Optional[list] = None


def bin_efficiencies(config: ExperimentConfig, arm: int) -> np.ndarray:
    """Overall survival probability per bin with a sinusoidal ripple.

    The ripple amplitude is ``bin_efficiency_variation / sqrt(2)``, so twice the
    relative standard deviation of the efficiencies over the bins equals
    ``bin_efficiency_variation``.
    """
    md = config.network_bins
    base = config.arm_transmission(arm) * config.detector_efficiency
    phase = (0.0, math.pi / 3)[arm]
    ripple = config.bin_efficiency_variation / math.sqrt(2) * np.sin(2 * np.pi * np.arange(md) / md + phase)
    return np.clip(base * (1.0 + ripple), 0.0, 1.0)


def sample_pair_number(config: ExperimentConfig, rng: np.random.Generator, size=None):
    """Negative-binomial pair numbers with mean ``mean_pairs`` and ``schmidt_modes`` modes.

    ``fixed_pairs`` overrides the statistics with a deterministic pair number.
    """
    if config.fixed_pairs is not None:
        return np.full(size, config.fixed_pairs, dtype=np.int64) if size is not None else config.fixed_pairs
    if config.mean_pairs == 0:
        return np.zeros(size, dtype=np.int64) if size is not None else 0
    mu = config.schmidt_modes
    return rng.negative_binomial(mu, mu / (mu + config.mean_pairs), size=size)


def _bernoulli_keys(rng: np.random.Generator, population: int, p: float) -> np.ndarray:
    """Sorted positions of successes among ``population`` Bernoulli(p) draws."""
    if p <= 0 or population == 0:
        return np.empty(0, dtype=np.int64)
    k = rng.binomial(population, p)
    return np.sort(rng.choice(population, size=k, replace=False)).astype(np.int64)


def _simulate_chunk(config: ExperimentConfig, index: int, start: int, trials: int) -> _Chunk:
    rng = np.random.default_rng([config.rng_seed, index])
    md = config.network_bins
    pairs = sample_pair_number(config, rng, size=trials)
    owner = np.repeat(np.arange(trials, dtype=np.int64), pairs)
    arms = []
    for arm in (0, 1):
        eff = bin_efficiencies(config, arm)
        bins = rng.integers(0, md, size=owner.size)
        alive = rng.random(owner.size) < eff[bins]
        photon = np.unique(owner[alive] * md + bins[alive])
        background = _bernoulli_keys(rng, trials * md, config.background_click_prob)
        arms.append(_ArmClicks(photon=photon, background=background))
    return _Chunk(index=index, start=start, trials=trials, arms=tuple(arms))


def _iter_chunks(config: ExperimentConfig) -> Iterator[_Chunk]:
    for index, start in enumerate(range(0, config.trials, CHUNK_TRIALS)):
        yield _simulate_chunk(config, index, start, min(CHUNK_TRIALS, config.trials - start))


def _tally(config: ExperimentConfig, chunk: _Chunk):
    md = config.network_bins
    per_arm, singles = [], []
    for arm in chunk.arms:
        keys = arm.clicked()
        per_arm.append(np.bincount(keys // md, minlength=chunk.trials))
        singles.append(np.bincount(keys % md, minlength=md))
    flat = per_arm[0] * (md + 1) + per_arm[1]
    joint = np.bincount(flat, minlength=(md + 1) ** 2).reshape(md + 1, md + 1)
    return joint, np.concatenate(singles)


def run_simulation(config: ExperimentConfig, keep_events: bool = False) -> SimulationRun:
    md = config.network_bins
    joint = np.zeros((md + 1, md + 1), dtype=np.int64)
    singles = np.zeros(2 * md, dtype=np.int64)
    kept = [] if keep_events else None
    for chunk in _iter_chunks(config):
        j, s = _tally(config, chunk)
        joint += j
        singles += s
        if keep_events:
            kept.append(chunk)
    return SimulationRun(
        config=config,
        joint=JointClickHistogram(md, md, joint),
        singles=SinglesProfile(singles, md),
        chunks=kept,
    )


def simulate_trials(config: ExperimentConfig) -> tuple[JointClickHistogram, SinglesProfile]:
    """Joint (n_A, n_B) click histogram and per-bin singles for ``config.trials`` trials."""
    run = run_simulation(config)
    return run.joint, run.singles


def iter_trial_outcomes(config: ExperimentConfig) -> Iterator[TrialOutcome]:
    """Per-trial clicked bin sets; slow, meant for inspection and tests."""
    md = config.network_bins
    for chunk in _iter_chunks(config):
        clicked = [arm.clicked() for arm in chunk.arms]
        split = [np.searchsorted(c // md, np.arange(chunk.trials + 1)) for c in clicked]
        for t in range(chunk.trials):
            sets = [
                frozenset((c[s[t]:s[t + 1]] % md).tolist()) for c, s in zip(clicked, split)
            ]
            yield TrialOutcome(clicked_a=sets[0], clicked_b=sets[1])


def jitter_rng(config: ExperimentConfig, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng([config.rng_seed, chunk_index, _JITTER_STREAM])


def pulse_sigma_schedule(config: ExperimentConfig) -> np.ndarray:
    """Gaussian pulse width per time slot, linear from the shortest to the longest delay."""
    slots = config.slots
    if slots == 1:
        return np.array([config.pulse_width_min_ps])
    return np.linspace(config.pulse_width_min_ps, config.pulse_width_max_ps, slots)


def synthesize_timetags(config: ExperimentConfig, sink, fmt: Optional[str] = None) -> int:
    """Write a time-tag stream for the simulated clicks; returns the event count.

    Photon clicks are Gaussian around their slot centre with the slot's pulse
    width, background clicks are uniform over the slot.  With
    ``timing_jitter`` off every event sits exactly on its slot centre.
    """
    from .timetag import write_stream

    stream = timetag_stream(config)
    write_stream(stream, sink, fmt=fmt)
    return len(stream)


def timetag_stream(config: ExperimentConfig):
    from .timetag import TimeTagStream

    run = run_simulation(config, keep_events=True)
    md, slots, tau = config.network_bins, config.slots, config.tau_ps
    sigma = pulse_sigma_schedule(config)
    channels, stamps = [], []
    for chunk in run.chunks:
        rng = jitter_rng(config, chunk.index)
        for arm_index, arm in enumerate(chunk.arms):
            for keys, is_photon in ((arm.photon, True), (arm.background, False)):
                trial = keys // md + chunk.start
                b = keys % md
                slot = b % slots
                channel = arm_index * config.detectors_per_arm + b // slots
                t = config.time_origin_ps + trial * config.trial_period_ps + slot * tau
                if config.timing_jitter:
                    if is_photon:
                        offset = np.rint(rng.normal(0.0, sigma[slot])).astype(np.int64)
                    else:
                        offset = rng.integers(-(tau // 2), tau - tau // 2, size=keys.size)
                    t = t + offset
                channels.append(channel.astype(np.uint8))
                stamps.append(t.astype(np.int64))
    if channels:
        ch = np.concatenate(channels)
        ts = np.concatenate(stamps)
    else:
        ch = np.empty(0, dtype=np.uint8)
        ts = np.empty(0, dtype=np.int64)
    order = np.lexsort((ch, ts))
    return TimeTagStream(ch[order], ts[order])
