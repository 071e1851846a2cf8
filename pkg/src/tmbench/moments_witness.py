"""Matrix-of-moments nonclassicality witness with mode-exchange symmetry reduction.

For K symmetric modes with D bins each, the (D/2+1)^K dimensional matrix of
moments collapses onto a (KD/2+1)-dimensional problem: rows with equal order
sum m are identical blocks, so only their multiplicities d_m enter, through the
scaling ``sqrt(d_j d_l)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.signal

from .click_counting import JointMomentTable, SymmetricMomentVector

__all__ = [
    "Multiplicities",
    "ReducedWitnessMatrix",
    "WitnessResult",
    "EigenSolverError",
    "multiplicities",
    "build_reduced_matrix",
    "min_eigenpair",
    "full_spectrum_minimum",
    "build_full_matrix_oracle",
    "eigenvalue_gradient",
    "build_joint_reduced_matrix",
    "joint_reduced_witness",
    "significance_of",
]

DENSE_LIMIT = 256
FULL_ORACLE_LIMIT = 4096


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Multiplicities:
    K: int
    D: int
    d: tuple

    @property
    def kappa(self) -> int:
        return len(self.d) - 1

    def sqrt_weights(self) -> np.ndarray:
        return np.array([math.sqrt(x) for x in self.d])


def multiplicities(K: int, D: int) -> Multiplicities:
    """Coefficients of ((1 - z^(D/2+1)) / (1 - z))^K as exact integers.

    ``d[m]`` counts the K-mode multi-indices with entries in 0..D/2 whose sum
    is m.  K = 0 is accepted and yields the trivial (1,).
    """
    if K < 0:
        raise ValueError(f"K must be nonnegative, got {K}")
    if D < 2 or D % 2:
        raise ValueError(f"D must be a positive even integer, got {D}")
    half = D // 2
    coeffs = [1]
    for _ in range(K):
        out = [0] * (len(coeffs) + half)
        for i, c in enumerate(coeffs):
            for j in range(half + 1):
                out[i + j] += c
        coeffs = out
    return Multiplicities(K=K, D=D, d=tuple(coeffs))


@dataclass(frozen=True)
class ReducedWitnessMatrix:
    K: int
    D: int
    entries: np.ndarray
    mult: Multiplicities
    source_moments: Optional[SymmetricMomentVector] = field(default=None, repr=False)

    @property
    def kappa(self) -> int:
        return self.mult.kappa

    @property
    def full_dimension(self) -> int:
        return (self.D // 2 + 1) ** self.K


@dataclass(frozen=True)
class WitnessResult:
    min_eigenvalue: float
    eigenvector: np.ndarray
    random_error: float = 0.0
    systematic_error: float = 0.0
    combined_error: float = 0.0
    significance: float = 0.0

    @classmethod
    def from_errors(cls, lam: float, vec: np.ndarray, random_error: float, systematic_error: float) -> "WitnessResult":
        combined = math.hypot(random_error, systematic_error)
        return cls(
            min_eigenvalue=float(lam),
            eigenvector=vec,
            random_error=float(random_error),
            systematic_error=float(systematic_error),
            combined_error=combined,
            significance=significance_of(lam, combined),
        )

    @property
    def certified(self) -> bool:
        return self.min_eigenvalue < 0 and self.significance > 0


def significance_of(lam: float, combined_error: float) -> float:
    """max(0, -lam) / error; ``inf`` for a negative value with zero error."""
    if combined_error < 0 or not math.isfinite(combined_error):
        raise ValueError(f"invalid combined error {combined_error}")
    negativity = max(0.0, -float(lam))
    if combined_error == 0.0:
        return math.inf if negativity > 0 else 0.0
    return negativity / combined_error


def _as_values(moments) -> np.ndarray:
    if isinstance(moments, SymmetricMomentVector):
        return np.asarray(moments.values, dtype=float)
    return np.asarray(moments, dtype=float)


def build_reduced_matrix(moments, K: int, D: int) -> ReducedWitnessMatrix:
    """Scaled matrix ``S G S`` with G[j, l] = G^(j+l) and S = diag(sqrt d_m)."""
    values = _as_values(moments)
    mult = multiplicities(K, D)
    kappa = mult.kappa
    if len(values) - 1 < 2 * kappa:
        raise ValueError(
            f"moments up to order {2 * kappa} required for K={K}, D={D}; "
            f"only {len(values) - 1} available"
        )
    idx = np.arange(kappa + 1)
    s = mult.sqrt_weights()
    entries = values[idx[:, None] + idx[None, :]] * np.outer(s, s)
    src = moments if isinstance(moments, SymmetricMomentVector) else None
    return ReducedWitnessMatrix(K=K, D=D, entries=entries, mult=mult, source_moments=src)


def _canonical_sign(vec: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(vec) > 1e-14 * np.abs(vec).max())
    if nz.size and vec[nz[0]] < 0:
        return -vec
    return vec


def min_eigenpair(matrix) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and unit eigenvector of a real symmetric matrix.

    The eigenvector's first non-negligible component is made positive.  When
    the minimum is degenerate the lexicographically smallest of the returned
    basis vectors is chosen.
    """
    a = matrix.entries if isinstance(matrix, ReducedWitnessMatrix) else np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise EigenSolverError("matrix contains non-finite entries")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    try:
        if n <= DENSE_LIMIT:
            w, v = np.linalg.eigh(a)
        else:
            w, v = scipy.linalg.eigh(a, subset_by_index=[0, min(3, n - 1)], driver="evr")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenSolverError(f"symmetric eigensolver failed: {exc}") from exc
    lam = float(w[0])
    scale = max(1.0, float(np.abs(w).max()))
    tied = [i for i in range(len(w)) if w[i] - lam <= 1e-12 * scale]
    candidates = [_canonical_sign(v[:, i]) for i in tied]
    vec = min(candidates, key=lambda x: tuple(np.round(x, 12)))
    vec = vec / np.linalg.norm(vec)
    # for symmetric matrices the max row sum bounds the spectral norm
    norm = float(np.abs(w).max()) if n <= DENSE_LIMIT else float(np.abs(a).sum(axis=1).max())
    resid = np.linalg.norm(a @ vec - lam * vec)
    if not np.isfinite(resid) or resid > 1e-8 * max(norm, 1e-300):
        raise EigenSolverError(f"eigenpair residual {resid:.3e} too large")
    return lam, vec


def full_spectrum_minimum(reduced: ReducedWitnessMatrix) -> float:
    """Smallest eigenvalue of the unreduced matrix, from the reduced one.

    Vectors that sum to zero inside any block of size d_m > 1 are exact null
    vectors of the full matrix, so its spectrum is the reduced spectrum plus
    zeros whenever the full dimension exceeds kappa + 1.
    """
    lam, _ = min_eigenpair(reduced)
    if reduced.full_dimension > reduced.kappa + 1:
        return min(lam, 0.0)
    return lam


def build_full_matrix_oracle(moments, K: int, D: int) -> np.ndarray:
    """Unreduced (D/2+1)^K matrix indexed by lexicographic multi-indices."""
    values = _as_values(moments)
    half = D // 2
    dim = (half + 1) ** K
    if dim > FULL_ORACLE_LIMIT:
        raise ValueError(f"full matrix of dimension {dim} exceeds oracle limit {FULL_ORACLE_LIMIT}")
    if len(values) - 1 < K * D:
        raise ValueError(f"moments up to order {K * D} required")
    sums = np.array([sum(ix) for ix in itertools.product(range(half + 1), repeat=K)])
    return values[sums[:, None] + sums[None, :]]


def eigenvalue_gradient(reduced: ReducedWitnessMatrix, eigvec: np.ndarray) -> np.ndarray:
    """d lambda / d G^(m) for m = 0..2 kappa with the eigenvector held fixed."""
    u = np.asarray(eigvec, dtype=float) * reduced.mult.sqrt_weights()
    return np.convolve(u, u)


def _joint_values(table) -> np.ndarray:
    if isinstance(table, JointMomentTable):
        return np.asarray(table.values, dtype=float)
    return np.asarray(table, dtype=float)


def build_joint_reduced_matrix(table, K_A: int, K_B: int, D_A: int, D_B: int) -> np.ndarray:
    """Reduced two-group matrix of dimension (kappa_A+1)(kappa_B+1).

    Rows are ordered (j_A, j_B) with j_B running fastest.
    """
    g = _joint_values(table)
    ma, mb = multiplicities(K_A, D_A), multiplicities(K_B, D_B)
    ka, kb = ma.kappa, mb.kappa
    if g.shape[0] - 1 < 2 * ka or g.shape[1] - 1 < 2 * kb:
        raise ValueError(
            f"joint moments up to orders ({2 * ka}, {2 * kb}) required, table has "
            f"({g.shape[0] - 1}, {g.shape[1] - 1})"
        )
    ia, ib = np.arange(ka + 1), np.arange(kb + 1)
    sum_a = (ia[:, None] + ia[None, :])[:, None, :, None]
    sum_b = (ib[:, None] + ib[None, :])[None, :, None, :]
    block = g[sum_a, sum_b]
    s = np.outer(ma.sqrt_weights(), mb.sqrt_weights())
    block = block * s[:, :, None, None] * s[None, None, :, :]
    n = (ka + 1) * (kb + 1)
    return block.reshape(n, n)


def joint_reduced_witness(
    table, K_A: int, K_B: int, D_A: int, D_B: int, systematic_rel: float = 0.0
) -> WitnessResult:
    """Minimal eigenvalue of the reduced signal-idler matrix with error bars.

    The random error is propagated straight through the click distribution
    (delta method) when ``table`` carries it; otherwise it is zero.
    """
    entries = build_joint_reduced_matrix(table, K_A, K_B, D_A, D_B)
    lam, vec = min_eigenpair(entries)
    ma, mb = multiplicities(K_A, D_A), multiplicities(K_B, D_B)
    u = (vec.reshape(ma.kappa + 1, mb.kappa + 1)
         * np.outer(ma.sqrt_weights(), mb.sqrt_weights()))
    grad = scipy.signal.convolve2d(u, u)
    g = _joint_values(table)[: grad.shape[0], : grad.shape[1]]
    rel = np.abs(grad) * g
    rel[0, 0] = 0.0
    systematic = systematic_rel * float(rel.sum())
    random = 0.0
    if isinstance(table, JointMomentTable) and table.frequencies is not None and table.trials > 0:
        wa = table.weights_a[: grad.shape[0]]
        wb = table.weights_b[: grad.shape[1]]
        h = wa.T @ grad @ wb
        c = table.frequencies
        mean = float((h * c).sum())
        var = (float((h * h * c).sum()) - mean * mean) / table.trials
        random = math.sqrt(max(var, 0.0))
    return WitnessResult.from_errors(lam, vec, random, systematic)
