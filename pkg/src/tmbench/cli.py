"""Command-line entry point: simulate, analyze, sweep and report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    SweepCell,
    cell_from_row,
    eigenvalue_scaled_systematic,
    results_csv,
    results_json,
    significance,
    sorted_cells,
    systematic_error,
    witness_cells,
)
from .click_counting import JointClickHistogram
from .config import (
    PAIRS_PER_MICROWATT,
    REFERENCE_PUMP_POWERS_UW,
    ConfigError,
    ExperimentConfig,
    load_config,
    mean_pairs_for_pump,
)
from .moments_witness import EigenSolverError
from .simulator import SinglesProfile, run_simulation, timetag_stream
from .timetag import (
    DYNAMIC_WINDOWS_SIGMA,
    TimeTagFormatError,
    WindowMode,
    accumulate,
    fit_bins,
    parse_stream,
    plan_windows,
    write_stream,
)

log = logging.getLogger("tmbench")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

TIMETAG_FILE = "timetags.ttg"
JOINT_FILE = "joint_histogram.csv"
SINGLES_FILE = "singles.csv"
MANIFEST_FILE = "manifest.json"
RESULTS_CSV = "results.csv"
RESULTS_JSON = "results.json"
REPORT_FILE = "report.json"
JOURNAL_FILE = "cells.jsonl"
TRUTH_MODE = "truth"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# --- small helpers ----------------------------------------------------------------------


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_atomic(path: Path, data) -> None:
    tmp = path.with_name(path.name + ".part")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def parse_herald_range(text: str) -> list[int]:
    """``A..B`` inclusive, or a single integer."""
    lo, sep, hi = text.partition("..")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise UsageError(f"herald range {text!r} is not of the form A..B") from None
    if a < 0 or b < a:
        raise UsageError(f"herald range {text!r} is empty or negative")
    return list(range(a, b + 1))


def parse_int_list(text: str, name: str) -> list[int]:
    try:
        values = [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise UsageError(f"{name} {text!r} must be comma-separated integers") from None
    if not values or min(values) < 1:
        raise UsageError(f"{name} must list positive integers")
    return values


def parse_windows(items: Optional[Sequence[str]]) -> list[WindowMode]:
    modes = []
    for item in items or []:
        for part in item.split(","):
            if part.strip():
                try:
                    modes.append(WindowMode.parse(part.strip()))
                except ValueError as exc:
                    raise UsageError(str(exc)) from None
    return modes


def make_manifest(command: str, config: Optional[ExperimentConfig], inputs: dict, params: dict) -> dict:
    """Run manifest; ``run_id`` depends only on what determines the outputs."""
    ident = {
        "command": command,
        "version": __version__,
        "config_digest": config.digest() if config else None,
        "inputs": inputs,
        "params": params,
    }
    run_id = hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()[:16]
    return {
        "run_id": run_id,
        "tool": "tmbench",
        "version": __version__,
        "command": command,
        "config": config.to_dict() if config else None,
        "config_digest": ident["config_digest"],
        "seed": config.rng_seed if config else None,
        "inputs": inputs,
        "params": params,
        "outputs": {},
        "timing": {},
    }


def _finish_manifest(manifest: dict, out: Path, names: Sequence[str], started: float) -> None:
    manifest["outputs"] = {n: sha256_file(out / n) for n in names}
    manifest["timing"] = {"wall_seconds": round(time.perf_counter() - started, 3)}
    _write_atomic(out / MANIFEST_FILE, json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _config_with_seed(config: ExperimentConfig, seed: Optional[int]) -> ExperimentConfig:
    return config if seed is None else config.replace(rng_seed=seed)


def _load_config_arg(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    if not Path(path).is_file():
        raise DataError(f"config file {path} not found")
    return load_config(path)


# --- histogram files ----------------------------------------------------------------------


def joint_csv(joint: JointClickHistogram, run_id: str) -> str:
    buf = io.StringIO()
    buf.write(f"# run {run_id}\n")
    buf.write("n_a,n_b,count\n")
    for a in range(joint.detector_count_a + 1):
        for b in range(joint.detector_count_b + 1):
            buf.write(f"{a},{b},{int(joint.counts[a, b])}\n")
    return buf.getvalue()


def singles_csv(singles: SinglesProfile, run_id: str) -> str:
    buf = io.StringIO()
    buf.write(f"# run {run_id}\n")
    buf.write("arm,bin,count\n")
    for arm in (0, 1):
        for b, c in enumerate(singles.arm(arm)):
            buf.write(f"{'AB'[arm]},{b},{int(c)}\n")
    return buf.getvalue()


def _read_csv_rows(path: Path, header: Sequence[str]) -> list[list[str]]:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or [h.strip() for h in lines[0].split(",")] != list(header):
        raise DataError(f"{path}: expected header {','.join(header)}")
    rows = []
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: malformed row {lineno}: {row}")
        rows.append(row)
    return rows


def read_joint_csv(path: Path) -> JointClickHistogram:
    try:
        rows = np.array(_read_csv_rows(path, ("n_a", "n_b", "count")), dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: non-integer entry ({exc})") from None
    if rows.size == 0:
        raise DataError(f"{path}: no rows")
    da, db = int(rows[:, 0].max()), int(rows[:, 1].max())
    counts = np.zeros((da + 1, db + 1), dtype=np.int64)
    counts[rows[:, 0], rows[:, 1]] = rows[:, 2]
    return JointClickHistogram(da, db, counts)


def read_singles_csv(path: Path) -> SinglesProfile:
    rows = _read_csv_rows(path, ("arm", "bin", "count"))
    per = {"A": {}, "B": {}}
    try:
        for arm, b, c in rows:
            per[arm][int(b)] = int(c)
    except (KeyError, ValueError):
        raise DataError(f"{path}: bad singles row") from None
    md = len(per["A"])
    if md == 0 or len(per["B"]) != md:
        raise DataError(f"{path}: both arms need the same number of bins")
    counts = [per[arm][b] for arm in "AB" for b in range(md)]
    return SinglesProfile(np.array(counts), md)


# --- subcommands ----------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    config = _config_with_seed(_load_config_arg(args.config), args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest("simulate", config, {}, {"timetag_format": args.format})
    run_id = manifest["run_id"]

    run = run_simulation(config)
    stream = timetag_stream(config)
    buf = io.BytesIO() if args.format == "binary" else io.StringIO()
    write_stream(stream, buf, fmt=args.format, comment=f"run {run_id}" if args.format == "csv" else None)
    name = TIMETAG_FILE if args.format == "binary" else "timetags.csv"
    _write_atomic(out / name, buf.getvalue())
    _write_atomic(out / JOINT_FILE, joint_csv(run.joint, run_id))
    _write_atomic(out / SINGLES_FILE, singles_csv(run.singles, run_id))
    manifest["counts"] = {"events": len(stream), "trials": config.trials}
    _finish_manifest(manifest, out, [name, JOINT_FILE, SINGLES_FILE], started)
    log.info("simulated %d trials, %d time tags -> %s", config.trials, len(stream), out)
    return EXIT_OK


def _sidecar_config(input_path: Path, explicit: Optional[str]) -> ExperimentConfig:
    if explicit is not None:
        return _load_config_arg(explicit)
    sidecar = input_path.parent / MANIFEST_FILE
    if sidecar.is_file():
        try:
            data = json.loads(sidecar.read_text())
            return ExperimentConfig.from_dict(data["config"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DataError(f"{sidecar}: unreadable manifest ({exc})") from None
    return ExperimentConfig()


def _pump_of(config: ExperimentConfig) -> float:
    if config.pump_power_uw is not None:
        return float(config.pump_power_uw)
    return config.mean_pairs / PAIRS_PER_MICROWATT


def _window_cells(stream, fits, config, mode, pump, heralds, k_list, args, n_trials):
    """Cells plus diagnostics for one window plan over one time-tag dataset."""
    plan = plan_windows(fits, mode)
    acc = accumulate(stream, plan, n_trials=n_trials)
    cells = witness_cells(
        acc.joint, acc.singles, pump=pump, window_mode=mode.kind, window_param=mode.value,
        herald_ns=heralds, k_list=k_list, bins_per_mode=args.bins_per_mode, herald_arm=args.herald_arm,
    )
    diag = {
        "window": mode.label,
        "total_events": acc.total_events,
        "in_window_events": acc.in_window_events,
        "discarded_events": acc.discarded_events,
        "clicks": acc.clicks,
    }
    diag.update(_eps_report(acc.singles, cells))
    return cells, diag


def _eps_report(singles: SinglesProfile, cells) -> dict:
    try:
        eps = systematic_error(singles)
    except ValueError as exc:
        return {"eps_sys": None, "eps_sys_error": str(exc)}
    alt = []
    for c in cells:
        if c.lambda_min is None:
            continue
        sys_alt = eigenvalue_scaled_systematic(c.lambda_min, eps.pooled)
        comb = math.hypot(c.err_random, sys_alt)
        sig = significance(c.lambda_min, comb) if c.lambda_min < 0 else None
        alt.append({"herald_n": c.herald_n, "K": c.K, "err_sys": sys_alt, "err_combined": comb,
                    "significance": "unbounded" if sig is not None and math.isinf(sig) else sig})
    return {
        "eps_sys": {"A": float(eps.per_arm[0]), "B": float(eps.per_arm[1]), "pooled": eps.pooled},
        "eigenvalue_scaled_systematic": alt,
    }


def _exit_for_cells(cells) -> int:
    statuses = [c.status for c in cells]
    if any(s.startswith("numerical") for s in statuses):
        return EXIT_NUMERICAL
    if any(s.startswith("error") for s in statuses):
        return EXIT_DATA
    return EXIT_OK


def cmd_analyze(args) -> int:
    started = time.perf_counter()
    src = Path(args.input)
    if not src.is_file():
        raise DataError(f"input file {src} not found")
    config = _sidecar_config(src, args.config)
    heralds = parse_herald_range(args.herald_range)
    k_list = parse_int_list(args.k_list, "--k-list")
    modes = parse_windows(args.windows)
    pump = _pump_of(config)
    inputs = {src.name: sha256_file(src)}
    report: dict = {"input": str(src)}
    cells: list[SweepCell] = []

    if src.name.endswith(JOINT_FILE) or (src.suffix == ".csv" and _looks_like_joint(src)):
        # ground-truth histograms written by `simulate`
        singles_path = src.parent / SINGLES_FILE
        if not singles_path.is_file():
            raise DataError(f"{singles_path} not found next to {src}")
        inputs[singles_path.name] = sha256_file(singles_path)
        joint = read_joint_csv(src)
        singles = read_singles_csv(singles_path)
        cells = witness_cells(joint, singles, pump=pump, window_mode=TRUTH_MODE, window_param=0.0,
                              herald_ns=heralds, k_list=k_list, bins_per_mode=args.bins_per_mode,
                              herald_arm=args.herald_arm)
        report["windows"] = [dict(window=TRUTH_MODE, **_eps_report(singles, cells))]
    else:
        if not modes:
            raise UsageError("analyze on time tags needs at least one --windows plan")
        try:
            stream = parse_stream(src, max_channel=2 * config.detectors_per_arm - 1)
        except TimeTagFormatError as exc:
            raise DataError(f"{src}: {exc}") from None
        fits = fit_bins(stream, config.trial_period_ps, config.slots, config.tau_ps)
        report["origin_ps"] = fits.origin_ps
        report["fits"] = fits.report_rows()
        report["flagged_bins"] = len(fits.flagged())
        report["windows"] = []
        for mode in modes:
            try:
                wc, diag = _window_cells(stream, fits, config, mode, pump, heralds, k_list, args, config.trials)
            except ValueError as exc:
                raise DataError(f"{src}: window {mode.label}: {exc}") from None
            cells.extend(wc)
            report["windows"].append(diag)

    params = {"windows": [m.label for m in modes], "herald_range": heralds, "k_list": k_list,
              "bins_per_mode": args.bins_per_mode, "herald_arm": args.herald_arm}
    manifest = make_manifest("analyze", config, inputs, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / RESULTS_CSV, results_csv(cells, f"run {manifest['run_id']}"))
    _write_atomic(out / RESULTS_JSON, results_json(cells, {"run_id": manifest["run_id"]}))
    report["run_id"] = manifest["run_id"]
    _write_atomic(out / REPORT_FILE, json.dumps(report, indent=1, sort_keys=True) + "\n")
    _finish_manifest(manifest, out, [RESULTS_CSV, RESULTS_JSON, REPORT_FILE], started)
    return _exit_for_cells(cells)


def _looks_like_joint(path: Path) -> bool:
    with open(path) as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                return line.strip() == "n_a,n_b,count"
    return False


# --- sweep -------------------------------------------------------------------------------


def _load_sweep_spec(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise DataError(f"sweep spec {p} not found")
    try:
        spec = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{p}: invalid JSON ({exc})") from None
    allowed = {"pump_powers_uw", "windows", "herald_range", "k_list", "bins_per_mode", "herald_arm"}
    unknown = sorted(set(spec) - allowed)
    if unknown:
        raise DataError(f"{p}: unknown sweep key {unknown[0]!r}")
    return spec


def _read_journal(path: Path) -> dict:
    """Completed cells from the journal; a torn final line is ignored."""
    done = {}
    if not path.is_file():
        return done
    for line in path.read_text().splitlines():
        try:
            cell = cell_from_row(json.loads(line)["cell"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            continue
        done[cell.key] = cell
    return done


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    spec = _load_sweep_spec(args.sweep)
    base = _config_with_seed(_load_config_arg(args.config), args.seed)
    pumps = [float(p) for p in (args.pumps.split(",") if args.pumps else spec.get("pump_powers_uw", REFERENCE_PUMP_POWERS_UW))]
    modes = parse_windows(args.windows) or parse_windows(
        spec.get("windows", [f"dynamic:{w:g}" for w in DYNAMIC_WINDOWS_SIGMA]))
    heralds = parse_herald_range(args.herald_range or spec.get("herald_range", "1..12"))
    k_list = parse_int_list(args.k_list or ",".join(map(str, spec.get("k_list", [64]))), "--k-list")
    if args.bins_per_mode is None:
        args.bins_per_mode = int(spec.get("bins_per_mode", 2))
    args.herald_arm = args.herald_arm or spec.get("herald_arm", "A")

    params = {"pumps": pumps, "windows": [m.label for m in modes], "herald_range": heralds,
              "k_list": k_list, "bins_per_mode": args.bins_per_mode, "herald_arm": args.herald_arm}
    manifest = make_manifest("sweep", base, {}, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    journal = out / JOURNAL_FILE
    done = _read_journal(journal) if args.resume else {}
    if not args.resume and journal.exists():
        journal.unlink()
    # rewrite the journal without torn lines before appending
    with open(journal, "w") as fh:
        for cell in sorted_cells(done):
            fh.write(_journal_line(cell, manifest, base))

    wanted = [(p, m, n, k) for p in pumps for m in modes for n in heralds for k in k_list]
    with open(journal, "a") as fh:
        for pump in pumps:
            todo = [m for m in modes
                    if any((pump, m.kind, m.value, n, k) not in done for n in heralds for k in k_list)]
            if not todo:
                continue
            config = base.replace(mean_pairs=mean_pairs_for_pump(pump), pump_power_uw=pump)
            stream = timetag_stream(config)
            fits = fit_bins(stream, config.trial_period_ps, config.slots, config.tau_ps)
            for mode in todo:
                try:
                    cells, _ = _window_cells(stream, fits, config, mode, pump, heralds, k_list, args, config.trials)
                except ValueError as exc:
                    cells = [SweepCell(pump, mode.kind, mode.value, n, k, status=f"error: {exc}")
                             for n in heralds for k in k_list]
                for cell in cells:
                    if cell.key in done:
                        continue
                    done[cell.key] = cell
                    fh.write(_journal_line(cell, manifest, config))
                fh.flush()
            log.info("pump %g uW done (%d cells)", pump, len(done))

    final = [done[(float(p), m.kind, float(m.value), int(n), int(k))] for p, m, n, k in wanted]
    _write_atomic(out / RESULTS_CSV, results_csv(final, f"run {manifest['run_id']}"))
    _write_atomic(out / RESULTS_JSON, results_json(final, {"run_id": manifest["run_id"]}))
    manifest["counts"] = {"cells": len(final)}
    _finish_manifest(manifest, out, [RESULTS_CSV, RESULTS_JSON], started)
    return _exit_for_cells(final)


def _journal_line(cell: SweepCell, manifest: dict, config: ExperimentConfig) -> str:
    row = cell.as_row()
    if row["significance"] is not None and math.isinf(row["significance"]):
        row["significance"] = "unbounded"
    entry = {"cell": row, "run_id": manifest["run_id"], "config_digest": config.digest(),
             "seed": config.rng_seed, "version": __version__}
    return json.dumps(entry, sort_keys=True) + "\n"


# --- report ----------------------------------------------------------------------------------


def _load_results(path: Path) -> list[SweepCell]:
    if path.is_dir():
        path = path / RESULTS_JSON
    if not path.is_file():
        raise DataError(f"results file {path} not found")
    try:
        doc = json.loads(path.read_text())
        return [cell_from_row(r) for r in doc["rows"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a results table ({exc})") from None


def _pivot_csv(cells, row_key, row_names, col_key, col_label, fmt, run_id) -> str:
    groups: dict = {}
    for c in cells:
        groups.setdefault(row_key(c), {})[col_key(c)] = c
    cols = sorted({col_key(c) for c in cells})
    buf = io.StringIO()
    buf.write(f"# run {run_id}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(row_names) + [f"{col_label}={v}" for v in cols])
    for key in sorted(groups):
        w.writerow([repr(v) if isinstance(v, float) else v for v in key]
                   + [fmt(groups[key].get(col)) for col in cols])
    return buf.getvalue()


def _neg(c):
    return "" if c is None or c.lambda_min is None else repr(max(0.0, -c.lambda_min))


def _sig(c):
    if c is None or c.significance is None:
        return ""
    return "unbounded" if math.isinf(c.significance) else repr(c.significance)


def cmd_report(args) -> int:
    started = time.perf_counter()
    src = Path(args.input)
    cells = _load_results(src)
    k_max = max((c.K for c in cells), default=0)
    manifest = make_manifest("report", None, {src.name: sha256_file(src / RESULTS_JSON if src.is_dir() else src)}, {})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_id = manifest["run_id"]
    # negativity vs K per herald; significance vs herald per window at the largest K
    fig2 = _pivot_csv(cells, lambda c: (c.pump, c.window_mode, c.window_param, c.herald_n),
                      ("pump", "window_mode", "window_param", "herald_n"), lambda c: c.K, "K", _neg, run_id)
    top = [c for c in cells if c.K == k_max]
    fig3 = _pivot_csv(top, lambda c: (c.pump, c.window_mode, c.window_param),
                      ("pump", "window_mode", "window_param"), lambda c: c.herald_n, "n", _sig, run_id)
    _write_atomic(out / "fig2_negativity.csv", fig2)
    _write_atomic(out / "fig3_significance.csv", fig3)
    _finish_manifest(manifest, out, ["fig2_negativity.csv", "fig3_significance.csv"], started)
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tmbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def analysis_flags(p, sweep=False):
        p.add_argument("--windows", action="append", metavar="static:<ps>|dynamic:<mult>",
                       help="window plan; repeat or comma-separate for several")
        p.add_argument("--herald-range", default=None if sweep else "1..3", metavar="A..B")
        p.add_argument("--k-list", default=None if sweep else "64", metavar="K1,K2,...")
        p.add_argument("--bins-per-mode", type=int, default=None if sweep else 2, metavar="D")
        p.add_argument("--herald-arm", choices=("A", "B"), default=None if sweep else "A")

    p = sub.add_parser("simulate", help="simulate trials and write time tags, histograms and singles")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--format", choices=("binary", "csv"), default="binary", help="time-tag file format")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="witness analysis of a time-tag file or a ground-truth histogram")
    p.add_argument("input", metavar="TIMETAGS")
    p.add_argument("--config", metavar="PATH", help="defaults to the manifest next to the input")
    p.add_argument("--out", required=True, metavar="DIR")
    analysis_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="pump x window x herald grid with a resumable journal")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--sweep", metavar="PATH", help="JSON sweep spec")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--pumps", metavar="P1,P2,...", help="pump powers in uW")
    p.add_argument("--resume", action="store_true", help="skip cells already in the journal")
    analysis_flags(p, sweep=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="pivot a results table into plot-ready figure tables")
    p.add_argument("input", metavar="RESULTS")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("tmbench: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tmbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError, TimeTagFormatError, OSError) as exc:
        print(f"tmbench: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EigenSolverError as exc:
        print(f"tmbench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
