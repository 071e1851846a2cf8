"""Error budget, heralding and witness sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .click_counting import (
    ClickHistogram,
    JointClickHistogram,
    moments_from_histogram,
)
from .estimator import covariance_from_frequencies, moment_weights
from .moments_witness import (
    EigenSolverError,
    ReducedWitnessMatrix,
    WitnessResult,
    build_reduced_matrix,
    eigenvalue_gradient,
    min_eigenpair,
    significance_of,
)
from .simulator import SinglesProfile

__all__ = [
    "ErrorBudget",
    "SystematicError",
    "HeraldedSlice",
    "SweepCell",
    "SweepDataset",
    "RESULT_COLUMNS",
    "LOW_STATISTICS_TRIALS",
    "moment_covariance",
    "bootstrap_covariance",
    "systematic_error",
    "propagate_witness_error",
    "significance",
    "certify",
    "monte_carlo_eigenvalue_spread",
    "herald_condition",
    "witness_cells",
    "sweep",
    "eigenvalue_scaled_systematic",
    "sorted_cells",
    "format_value",
    "results_csv",
    "results_json",
    "cell_from_row",
]

LOW_STATISTICS_TRIALS = 100

RESULT_COLUMNS = (
    "pump", "window_mode", "window_param", "herald_n", "K", "lambda_min",
    "err_random", "err_sys", "err_combined", "significance", "trials",
)


@dataclass(frozen=True)
class ErrorBudget:
    covariance: np.ndarray
    systematic_rel: float = 0.0

    def __post_init__(self):
        if self.systematic_rel < 0:
            raise ValueError("systematic relative error must be nonnegative")

    @property
    def random_std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


@dataclass(frozen=True)
class SystematicError:
    per_arm: tuple
    pooled: float

    def __float__(self) -> float:
        return self.pooled


@dataclass(frozen=True)
class HeraldedSlice:
    herald_arm: str
    herald_clicks: int
    histogram: ClickHistogram

    @property
    def trials(self) -> int:
        return self.histogram.trials

    @property
    def low_statistics(self) -> bool:
        return self.trials < LOW_STATISTICS_TRIALS


def moment_covariance(hist: ClickHistogram, max_order: int) -> np.ndarray:
    """Delta-method covariance of the moment estimates, (1/C)[E w_m w_m' - G_m G_m']."""
    if hist.trials == 0:
        raise ValueError("covariance needs at least one trial")
    w = moment_weights(hist.detector_count, max_order)
    return covariance_from_frequencies(w, hist.frequencies(), hist.trials)


def bootstrap_covariance(hist: ClickHistogram, max_order: int, resamples: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Empirical covariance of moment estimates over multinomial resamples."""
    w = moment_weights(hist.detector_count, max_order)
    draws = rng.multinomial(hist.trials, hist.frequencies(), size=resamples) / hist.trials
    return np.cov(draws @ w.T, rowvar=False)


def systematic_error(singles: SinglesProfile) -> SystematicError:
    """Twice the relative standard deviation of the per-bin singles.

    Computed per arm; the pooled value uses every bin relative to its own
    arm's mean so different arm transmissions do not count as asymmetry.
    """
    rel = []
    per_arm = []
    for arm in (0, 1):
        counts = singles.arm(arm).astype(float)
        if np.count_nonzero(counts) < 2:
            raise ValueError(f"arm {'AB'[arm]} has fewer than two bins with counts")
        mean = counts.mean()
        per_arm.append(2.0 * counts.std() / mean)
        rel.append(counts / mean)
    pooled = 2.0 * float(np.concatenate(rel).std())
    return SystematicError(per_arm=tuple(per_arm), pooled=pooled)


def propagate_witness_error(
    matrix: ReducedWitnessMatrix, eigvec: np.ndarray, budget: ErrorBudget
) -> tuple[float, float, float]:
    """First-order (fixed eigenvector) random, systematic and combined errors.

    The systematic part treats ``systematic_rel`` as a common relative scale
    uncertainty of all moments G^(m), m >= 1; G^(0) = 1 is exact.
    """
    eigvec = np.asarray(eigvec, dtype=float)
    if eigvec.shape != (matrix.kappa + 1,):
        raise ValueError(f"eigenvector length {eigvec.shape} does not match kappa+1 = {matrix.kappa + 1}")
    grad = eigenvalue_gradient(matrix, eigvec)
    n = grad.size
    cov = np.asarray(budget.covariance)
    if cov.shape[0] < n:
        raise ValueError(f"covariance covers orders up to {cov.shape[0] - 1}, need {n - 1}")
    cov = cov[:n, :n]
    random = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    if matrix.source_moments is not None:
        g = np.asarray(matrix.source_moments.values[:n])
    else:
        raise ValueError("systematic error needs the source moments of the matrix")
    systematic = budget.systematic_rel * float(np.sum(np.abs(grad[1:]) * g[1:]))
    return random, systematic, math.hypot(random, systematic)


def eigenvalue_scaled_systematic(lam: float, systematic_rel: float) -> float:
    """Alternative convention: the relative systematic error scales the eigenvalue itself."""
    return systematic_rel * abs(float(lam))


def significance(lam: float, combined_error: float) -> float:
    """Negativity in units of the combined error; ``inf`` when unbounded."""
    return significance_of(lam, combined_error)


def certify(hist: ClickHistogram, K: int, D: int, systematic_rel: float = 0.0) -> tuple[WitnessResult, ReducedWitnessMatrix]:
    """Full single-group pipeline: moments, reduced matrix, eigenpair, errors."""
    order = K * D
    moments = moments_from_histogram(hist, order)
    matrix = build_reduced_matrix(moments, K, D)
    lam, vec = min_eigenpair(matrix)
    budget = ErrorBudget(moments.covariance, systematic_rel)
    rnd, sys_, _ = propagate_witness_error(matrix, vec, budget)
    return WitnessResult.from_errors(lam, vec, rnd, sys_), matrix


def monte_carlo_eigenvalue_spread(hist: ClickHistogram, K: int, D: int, samples: int,
                                  rng: np.random.Generator) -> float:
    """Standard deviation of the minimal eigenvalue over multinomial resamples."""
    w = moment_weights(hist.detector_count, K * D)
    draws = rng.multinomial(hist.trials, hist.frequencies(), size=samples) / hist.trials
    lams = [min_eigenpair(build_reduced_matrix(w @ d, K, D))[0] for d in draws]
    return float(np.std(lams, ddof=1))


def herald_condition(joint: JointClickHistogram, arm: str, n: int) -> HeraldedSlice:
    """Click histogram of the other arm given ``n`` clicks on ``arm``."""
    if arm == "A":
        if not 0 <= n <= joint.detector_count_a:
            raise ValueError(f"herald click number {n} outside [0, {joint.detector_count_a}]")
        counts, d_other = joint.counts[n, :], joint.detector_count_b
    elif arm == "B":
        if not 0 <= n <= joint.detector_count_b:
            raise ValueError(f"herald click number {n} outside [0, {joint.detector_count_b}]")
        counts, d_other = joint.counts[:, n], joint.detector_count_a
    else:
        raise ValueError(f"arm must be 'A' or 'B', got {arm!r}")
    if counts.sum() == 0:
        raise ValueError(f"no trials with {n} herald clicks in arm {arm}")
    return HeraldedSlice(arm, n, ClickHistogram(d_other, counts.copy()))


# --- sweeps ------------------------------------------------------------------------------


@dataclass
class SweepCell:
    pump: float
    window_mode: str
    window_param: float
    herald_n: int
    K: int
    lambda_min: Optional[float] = None
    err_random: Optional[float] = None
    err_sys: Optional[float] = None
    err_combined: Optional[float] = None
    significance: Optional[float] = None
    trials: int = 0
    status: str = "ok"

    @property
    def key(self) -> tuple:
        return (float(self.pump), self.window_mode, float(self.window_param), int(self.herald_n), int(self.K))

    def as_row(self) -> dict:
        return {
            "pump": self.pump, "window_mode": self.window_mode, "window_param": self.window_param,
            "herald_n": self.herald_n, "K": self.K, "lambda_min": self.lambda_min,
            "err_random": self.err_random, "err_sys": self.err_sys, "err_combined": self.err_combined,
            "significance": self.significance, "trials": self.trials, "status": self.status,
        }


def witness_cells(
    joint: JointClickHistogram,
    singles: SinglesProfile,
    *,
    pump: float = 0.0,
    window_mode: str = "",
    window_param: float = 0.0,
    herald_ns: Iterable[int] = (1,),
    k_list: Sequence[int] = (1,),
    bins_per_mode: int = 2,
    herald_arm: str = "A",
) -> list[SweepCell]:
    """Heralded witnesses for every (herald n, K) on one dataset.

    Cells with no heralding trials are returned with status ``empty``; slices
    under 100 trials carry ``low_stats``.  Exceptions in one cell are recorded
    and do not stop the others.
    """
    try:
        eps = systematic_error(singles).pooled
    except ValueError:
        eps = 0.0
    out = []
    for n in herald_ns:
        try:
            sl = herald_condition(joint, herald_arm, n)
        except ValueError:
            sl = None
        for K in k_list:
            cell = SweepCell(pump, window_mode, window_param, n, K)
            if sl is None:
                cell.status = "empty"
                out.append(cell)
                continue
            cell.trials = sl.trials
            try:
                res, _ = certify(sl.histogram, K, bins_per_mode, eps)
            except EigenSolverError as exc:
                cell.status = f"numerical: {exc}"
            except ValueError as exc:
                cell.status = f"error: {exc}"
            else:
                cell.lambda_min = res.min_eigenvalue
                cell.err_random = res.random_error
                cell.err_sys = res.systematic_error
                cell.err_combined = res.combined_error
                cell.significance = res.significance if res.min_eigenvalue < 0 else None
                if math.isinf(res.significance):
                    cell.status = "unbounded"
                elif sl.low_statistics:
                    cell.status = "low_stats"
            out.append(cell)
    return out


@dataclass
class SweepDataset:
    pump: float
    window_mode: str
    window_param: float
    joint: JointClickHistogram
    singles: SinglesProfile


def sweep(
    datasets: Iterable[SweepDataset],
    k_list: Sequence[int],
    herald_range: Iterable[int],
    bins_per_mode: int = 2,
    herald_arm: str = "A",
) -> dict:
    """Evaluate every (dataset, herald n, K) cell; returns cells keyed by their identity."""
    heralds = list(herald_range)
    table: dict = {}
    for ds in datasets:
        for cell in witness_cells(
            ds.joint, ds.singles, pump=ds.pump, window_mode=ds.window_mode,
            window_param=ds.window_param, herald_ns=heralds, k_list=k_list,
            bins_per_mode=bins_per_mode, herald_arm=herald_arm,
        ):
            table[cell.key] = cell
    return table


# --- result tables -------------------------------------------------------------------


def sorted_cells(cells) -> list[SweepCell]:
    if isinstance(cells, dict):
        cells = cells.values()
    return sorted(cells, key=lambda c: c.key)


def format_value(name: str, value) -> str:
    """CSV text for one result field; blank significance means nothing to certify."""
    if value is None:
        return ""
    if name == "significance" and math.isinf(value):
        return "unbounded"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_value(name, value):
    if name == "significance" and value is not None and math.isinf(value):
        return "unbounded"
    return value


def results_csv(cells, header_comment: Optional[str] = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    columns = RESULT_COLUMNS + ("status",)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for cell in sorted_cells(cells):
        row = cell.as_row()
        writer.writerow([format_value(c, row[c]) for c in columns])
    return buf.getvalue()


def results_json(cells, meta: Optional[dict] = None) -> str:
    rows = [{k: _json_value(k, v) for k, v in c.as_row().items()} for c in sorted_cells(cells)]
    doc = {"columns": list(RESULT_COLUMNS) + ["status"], "rows": rows}
    if meta:
        doc["meta"] = meta
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def cell_from_row(row: dict) -> SweepCell:
    """Inverse of ``SweepCell.as_row`` for rows read back from JSON."""
    sig = row.get("significance")
    if sig == "unbounded":
        sig = math.inf
    return SweepCell(
        pump=float(row["pump"]), window_mode=row["window_mode"], window_param=float(row["window_param"]),
        herald_n=int(row["herald_n"]), K=int(row["K"]), lambda_min=row.get("lambda_min"),
        err_random=row.get("err_random"), err_sys=row.get("err_sys"), err_combined=row.get("err_combined"),
        significance=sig, trials=int(row.get("trials", 0)), status=row.get("status", "ok"),
    )
