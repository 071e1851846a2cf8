"""Lossless reference theory for N photons split uniformly over M modes.

Everything here is exact or log-space closed form and serves as ground truth
for the click-counting machinery.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

__all__ = [
    "FockSplitConfig",
    "output_probability",
    "ideal_correlation",
    "ideal_correlation_exact",
    "ideal_correlation_oracle",
    "iter_patterns",
]

# above this the big-integer path is skipped in favour of lgamma
EXACT_MAX_N = 20
ORACLE_MAX_N = 12
ORACLE_MAX_M = 8


@dataclass(frozen=True)
class FockSplitConfig:
    photon_number: int
    mode_count: int

    def __post_init__(self):
        if self.photon_number < 0:
            raise ValueError(f"photon_number must be >= 0, got {self.photon_number}")
        if self.mode_count < 1:
            raise ValueError(f"mode_count must be >= 1, got {self.mode_count}")


def _check_length(config: FockSplitConfig, seq: Sequence[int], what: str) -> None:
    if len(seq) != config.mode_count:
        raise ValueError(
            f"{what} has length {len(seq)} but the configuration has "
            f"{config.mode_count} modes"
        )
    if any(int(x) < 0 for x in seq):
        raise ValueError(f"{what} entries must be nonnegative: {tuple(seq)}")


def iter_patterns(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """All occupation tuples of length ``m`` summing to ``n``, lexicographic."""
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in iter_patterns(n - first, m - 1):
            yield (first,) + rest


def output_probability(config: FockSplitConfig, pattern: Sequence[int]) -> float:
    """Multinomial weight N!/(M^N n_1!...n_M!) of one output pattern."""
    _check_length(config, pattern, "pattern")
    n = config.photon_number
    if sum(pattern) != n:
        raise ValueError(f"pattern sums to {sum(pattern)}, expected {n}")
    m = config.mode_count
    if n <= EXACT_MAX_N:
        num = math.factorial(n)
        den = m**n * math.prod(math.factorial(k) for k in pattern)
        return float(Fraction(num, den))
    log_p = math.lgamma(n + 1) - n * math.log(m) - sum(math.lgamma(k + 1) for k in pattern)
    return math.exp(log_p)


def ideal_correlation_exact(config: FockSplitConfig, idx: Sequence[int]) -> Fraction:
    """Rational value of the normally ordered moment, exact for any size."""
    _check_length(config, idx, "multi-index")
    n, order = config.photon_number, sum(idx)
    if order > n:
        return Fraction(0)
    return Fraction(math.factorial(n), math.factorial(n - order) * config.mode_count**order)


def ideal_correlation(config: FockSplitConfig, idx: Sequence[int]) -> float:
    """Normally ordered photon-number moment of the split Fock state.

    Equals N!/((N - sum m) ! * M**sum m) and vanishes once the total order
    exceeds N.  Only the sum of ``idx`` matters.
    """
    _check_length(config, idx, "multi-index")
    n, order = config.photon_number, sum(idx)
    if order > n:
        return 0.0
    if n <= EXACT_MAX_N:
        return float(ideal_correlation_exact(config, idx))
    log_g = math.lgamma(n + 1) - math.lgamma(n - order + 1) - order * math.log(config.mode_count)
    return math.exp(log_g)


def _falling(x: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= x - i
    return out


def ideal_correlation_oracle(config: FockSplitConfig, idx: Sequence[int]) -> float:
    """Brute-force route: enumerate every output pattern and sum factorial moments.

    Independent of the closed form; only meant for small instances.
    """
    _check_length(config, idx, "multi-index")
    n, m = config.photon_number, config.mode_count
    if n > ORACLE_MAX_N or m > ORACLE_MAX_M:
        raise ValueError(
            f"instance N={n}, M={m} too large for enumeration "
            f"(limits N<={ORACLE_MAX_N}, M<={ORACLE_MAX_M})"
        )
    total = Fraction(0)
    norm = m**n
    nfact = math.factorial(n)
    for pattern in iter_patterns(n, m):
        weight = Fraction(nfact, norm * math.prod(math.factorial(k) for k in pattern))
        # <:n^k:> is the falling factorial n(n-1)...(n-k+1)
        moment = math.prod(_falling(nj, mj) for nj, mj in zip(pattern, idx))
        if moment:
            total += weight * moment
    return float(total)


def all_multi_indices(m: int, max_order: int) -> Iterator[tuple[int, ...]]:
    return itertools.product(range(max_order + 1), repeat=m)
