"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import io
import json
import math
import time

import numpy as np
import pytest

from tmbench.analysis import certify, systematic_error, witness_cells
from tmbench.click_counting import (
    ClickHistogram,
    SourceModel,
    exact_click_distribution,
    mixture_click_distribution,
    moments_from_distribution,
)
from tmbench.cli import main
from tmbench.config import ExperimentConfig
from tmbench.ideal_theory import (
    FockSplitConfig,
    all_multi_indices,
    ideal_correlation,
    ideal_correlation_oracle,
)
from tmbench.moments_witness import (
    build_full_matrix_oracle,
    build_reduced_matrix,
    full_spectrum_minimum,
    min_eigenpair,
    multiplicities,
)
from tmbench.simulator import simulate_trials, timetag_stream
from tmbench.timetag import TimeTagStream, accumulate, fit_bins, parse_stream, plan_windows, write_stream

SINGLE_PHOTON_LAMBDA = (1 - math.sqrt(2)) / 2
K_LIST = (1, 2, 4, 8, 16, 32, 64)


@pytest.fixture(scope="module")
def default_run():
    """Ground-truth histograms at the default configuration, 10^6 trials, and the time taken."""
    start = time.perf_counter()
    joint, singles = simulate_trials(ExperimentConfig())
    return joint, singles, time.perf_counter() - start


def test_c01_reduction_exactness(acceptance):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = worst_raw = 0.0
    for K in (1, 2, 3):
        for D in (2, 4):
            for _ in range(200):
                g = np.concatenate([[1.0], np.sort(rng.uniform(0, 1, K * D))[::-1]])
                full = np.linalg.eigvalsh(build_full_matrix_oracle(g, K, D))[0]
                red = build_reduced_matrix(g, K, D)
                worst = max(worst, abs(full - full_spectrum_minimum(red)))
                worst_raw = max(worst_raw, abs(full - min_eigenpair(red)[0]))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10
    acceptance(1, ok, f"max |diff| {worst:.2e} (reduced spectrum alone {worst_raw:.2e}), {elapsed:.2f} s")
    assert ok


def test_c02_multiplicities(acceptance):
    start = time.perf_counter()
    d = multiplicities(64, 2).d
    elapsed = time.perf_counter() - start
    ok = sum(d) == 2 ** 64 and list(d) == [math.comb(64, m) for m in range(65)] and elapsed < 1
    acceptance(2, ok, f"sum d_m = {sum(d)}, {elapsed * 1e3:.1f} ms")
    assert ok


def test_c03_ideal_theory_oracle(acceptance):
    start = time.perf_counter()
    worst, count = 0.0, 0
    for n in range(7):
        for m in range(1, 5):
            cfg = FockSplitConfig(n, m)
            for idx in all_multi_indices(m, n):
                ref = ideal_correlation_oracle(cfg, idx)
                worst = max(worst, abs(ideal_correlation(cfg, idx) - ref))
                count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5
    acceptance(3, ok, f"{count} correlations, max |diff| {worst:.1e}, {elapsed:.2f} s")
    assert ok


def test_c04_single_photon(acceptance):
    dist = exact_click_distribution(SourceModel.fock(1), 2)
    exact = min_eigenpair(build_reduced_matrix(moments_from_distribution(dist, 2), 1, 2))[0]
    # weak lossless pairs; heralding one click in arm A leaves ~10^5 single photons in arm B
    cfg = ExperimentConfig(
        network_bins=2, detectors_per_arm=2, transmission_a=1.0, transmission_b=1.0,
        detector_efficiency=1.0, background_click_prob=0.0, bin_efficiency_variation=0.0,
        timing_jitter=False, mean_pairs=0.001, trials=100_000_000,
    )
    joint, singles = simulate_trials(cfg)
    (cell,) = witness_cells(joint, singles, herald_ns=[1], k_list=[1], bins_per_mode=2)
    diff = cell.lambda_min - SINGLE_PHOTON_LAMBDA
    ok = abs(exact - SINGLE_PHOTON_LAMBDA) <= 1e-12 and abs(diff) <= 3 * cell.err_combined
    acceptance(4, ok, f"exact error {abs(exact - SINGLE_PHOTON_LAMBDA):.1e}; Monte Carlo {cell.trials} heralds, "
                      f"bias {diff:.2e} = {abs(diff) / cell.err_combined:.2f} combined sigma "
                      f"({abs(diff) / cell.err_random:.1f} random-only sigma)")
    assert ok


def test_c05_classical_fuzzing(acceptance):
    rng = np.random.default_rng(2024)
    passed, worst_exact, failures = 0, math.inf, []
    for run in range(100):
        k = rng.integers(1, 6)
        means = rng.uniform(0.5, 20.0, k)
        weights = rng.dirichlet(np.ones(k))
        dist = mixture_click_distribution([SourceModel.coherent(m) for m in means], weights, 128)
        K = int(rng.integers(1, 65))
        g = moments_from_distribution(dist, 128)
        for kk in sorted(set(K_LIST) | {K}):
            worst_exact = min(worst_exact, min_eigenpair(build_reduced_matrix(g[:2 * kk + 1], kk, 2))[0])
        hist = ClickHistogram(128, rng.multinomial(100_000, dist / dist.sum()))
        res, _ = certify(hist, K, 2, 0.0)
        if res.min_eigenvalue >= -3 * res.combined_error:
            passed += 1
        else:
            failures.append(f"run {run} K={K} lambda={res.min_eigenvalue:.2e} err={res.combined_error:.1e}")
    ok = passed >= 95 and worst_exact >= -1e-10
    acceptance(5, ok, f"{passed}/100 within 3 sigma; exact min lambda {worst_exact:.1e}"
                      + (f"; outside: {'; '.join(failures)}" if failures else ""))
    assert ok


def test_c06_negativity_grows_with_k(default_run, acceptance):
    start = time.perf_counter()
    joint, singles, simulated = default_run
    cells = witness_cells(joint, singles, herald_ns=range(1, 7), k_list=K_LIST)
    bad = []
    for n in range(1, 7):
        row = [c for c in cells if c.herald_n == n]
        drops = [(a, b) for a, b in zip(row, row[1:]) if abs(b.lambda_min) < abs(a.lambda_min)]
        within = all(abs(a.lambda_min) - abs(b.lambda_min) <= math.hypot(a.err_combined, b.err_combined)
                     for a, b in drops)
        if len(drops) > 1 or not within:
            bad.append(n)
    elapsed = time.perf_counter() - start + simulated
    top = {c.herald_n: c.lambda_min for c in cells if c.K == 64}
    ok = not bad and elapsed < 120
    acceptance(6, ok, f"heralds failing {bad or 'none'}; lambda(K=64) by herald "
                      + ", ".join(f"{n}:{v:.3g}" for n, v in top.items()) + f"; {elapsed:.1f} s")
    assert ok


def test_c07_dynamic_windows_win(acceptance):
    start = time.perf_counter()
    cfg = ExperimentConfig()
    stream = timetag_stream(cfg)
    fits = fit_bins(stream, cfg.trial_period_ps, cfg.slots, cfg.tau_ps)
    sig = {}
    for spec in ("dynamic:1", "static:100", "static:1000"):
        acc = accumulate(stream, plan_windows(fits, spec), n_trials=cfg.trials)
        for c in witness_cells(acc.joint, acc.singles, herald_ns=(1, 2, 3), k_list=(64,)):
            sig[spec, c.herald_n] = c.significance or 0.0
    elapsed = time.perf_counter() - start
    ok = all(sig["dynamic:1", n] >= sig[s, n] for n in (1, 2, 3) for s in ("static:100", "static:1000"))
    ok = ok and elapsed < 120
    detail = "; ".join(f"n={n} " + "/".join(f"{sig[s, n]:.3g}" for s in ("dynamic:1", "static:100", "static:1000"))
                       for n in (1, 2, 3))
    acceptance(7, ok, f"significance dynamic:1/static:100/static:1000: {detail}; {elapsed:.1f} s")
    assert ok


def test_c08_systematic_regime(default_run, acceptance):
    _, singles, _ = default_run
    eps = systematic_error(singles)
    ok = 0.03 <= eps.pooled <= 0.10
    acceptance(8, ok, f"eps pooled {eps.pooled:.4f} (A {eps.per_arm[0]:.4f}, B {eps.per_arm[1]:.4f})")
    assert ok


def test_c09_full_sweep(tmp_path, acceptance):
    out = tmp_path / "sweep"
    start = time.perf_counter()
    code = main(["sweep", "--out", str(out)])
    elapsed = time.perf_counter() - start
    rows = json.loads((out / "results.json").read_text())["rows"]
    keys = {(r["pump"], r["window_mode"], r["window_param"], r["herald_n"], r["K"]) for r in rows}
    first = (out / "results.csv").read_text()
    # cut the journal mid-way through the last pump and resume
    journal = out / "cells.jsonl"
    lines = journal.read_text().splitlines(keepends=True)
    journal.write_text("".join(lines[:900]) + lines[900][:17])
    resumed = main(["sweep", "--out", str(out), "--resume"])
    same = (out / "results.csv").read_text() == first
    total = time.perf_counter() - start
    statuses = {}
    for r in rows:
        statuses[r["status"]] = statuses.get(r["status"], 0) + 1
    ok = code == 0 and resumed == 0 and len(rows) == 960 and len(keys) == 960 and same and total < 600
    acceptance(9, ok, f"{len(keys)} keyed cells {statuses}; resume identical: {same}; "
                      f"sweep {elapsed:.0f} s, with resume {total:.0f} s")
    assert ok


def test_c10_performance(default_run, acceptance):
    joint, _, _ = default_run
    full = ClickHistogram(128, joint.marginal("B").counts)
    best = math.inf
    for _ in range(3):
        start = time.perf_counter()
        res, matrix = certify(full, 64, 2, 0.05)
        best = min(best, time.perf_counter() - start)
    assert matrix.entries.shape == (65, 65)

    n = 1_000_000
    rng = np.random.default_rng(3)
    stream = TimeTagStream(rng.integers(0, 4, n), np.cumsum(rng.integers(1, 10_000, n)))
    buf = io.BytesIO()
    write_stream(stream, buf, fmt="binary")
    blob = buf.getvalue()
    parse = math.inf
    for _ in range(3):
        start = time.perf_counter()
        parsed = parse_stream(blob)
        parse = min(parse, time.perf_counter() - start)
    rate = n / parse
    ok = best < 1.0 and rate >= 1e6 and parsed == stream
    acceptance(10, ok, f"65x65 witness with errors {best * 1e3:.0f} ms on {full.trials} trials; "
                       f"binary parse {rate / 1e6:.1f} M records/s")
    assert ok
