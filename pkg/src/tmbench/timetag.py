"""Time-tag ingestion, per-bin pulse fitting and coincidence-window accumulation.

File formats
------------
CSV: optional ``#`` comment lines, then the header ``channel,timestamp_ps`` and
one ``<channel>,<timestamp>`` record per line in ASCII decimal.

Binary: the magic ``TTG1``, a version byte (1), then packed little-endian
frames of a 1-byte channel and an 8-byte unsigned picosecond timestamp.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .click_counting import JointClickHistogram
from .simulator import SinglesProfile

__all__ = [
    "TimeTagRecord",
    "TimeTagStream",
    "TimeTagFormatError",
    "WindowMode",
    "BinFit",
    "GaussianFit",
    "BinWindowPlan",
    "AccumulationResult",
    "parse_stream",
    "write_stream",
    "estimate_origin",
    "fit_bins",
    "plan_windows",
    "accumulate",
    "STATIC_WINDOWS_PS",
    "DYNAMIC_WINDOWS_SIGMA",
]

MAGIC = b"TTG1"
VERSION = 1
FRAME = np.dtype([("channel", "u1"), ("timestamp", "<u8")])
CSV_HEADER = "channel,timestamp_ps"

MIN_FIT_EVENTS = 50
SIGMA_FLOOR_PS = 10.0
SIGMA_CEIL_PS = 10_000.0

# window lists used in the reference sweeps
STATIC_WINDOWS_PS = (20, 50, 100, 150, 200, 500, 1000, 1500, 2000, 2500, 5000, 6000, 8000, 10000, 15000, 30000)
DYNAMIC_WINDOWS_SIGMA = (0.1, 0.2, 0.5, 0.8, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 6.0, 8.0, 15.0, 20.0, 40.0)


class TimeTagFormatError(ValueError):
    """Malformed time-tag input; ``position`` is a 1-based line or a byte offset."""

    def __init__(self, message: str, position: Optional[int] = None, unit: str = "line"):
        self.position = position
        self.unit = unit
        where = f" at {unit} {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class TimeTagRecord:
    channel: int
    timestamp: int


class TimeTagStream:
    """Column-oriented sequence of time-tag records."""

    def __init__(self, channel, timestamp):
        self.channel = np.asarray(channel, dtype=np.uint8)
        self.timestamp = np.asarray(timestamp, dtype=np.int64)
        if self.channel.shape != self.timestamp.shape:
            raise ValueError("channel and timestamp columns differ in length")

    def __len__(self) -> int:
        return int(self.channel.size)

    def __getitem__(self, i: int) -> TimeTagRecord:
        return TimeTagRecord(int(self.channel[i]), int(self.timestamp[i]))

    def __iter__(self) -> Iterator[TimeTagRecord]:
        for c, t in zip(self.channel.tolist(), self.timestamp.tolist()):
            yield TimeTagRecord(c, t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return np.array_equal(self.channel, other.channel) and np.array_equal(self.timestamp, other.timestamp)

    @classmethod
    def from_records(cls, records: Sequence[TimeTagRecord]) -> "TimeTagStream":
        return cls([r.channel for r in records], [r.timestamp for r in records])

    def normalized(self) -> "TimeTagStream":
        """Stable sort by timestamp so every channel is nondecreasing."""
        order = np.argsort(self.timestamp, kind="stable")
        return TimeTagStream(self.channel[order], self.timestamp[order])


# --- parsing and writing ----------------------------------------------------------


def _read_source(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        return Path(source).read_bytes()
    data = source.read()
    return data.encode() if isinstance(data, str) else data


def _parse_binary(data: bytes, max_channel: Optional[int]) -> TimeTagStream:
    if len(data) < len(MAGIC) + 1:
        raise TimeTagFormatError("binary header truncated", len(data), "byte offset")
    version = data[len(MAGIC)]
    if version != VERSION:
        raise TimeTagFormatError(f"unsupported binary version {version}", len(MAGIC), "byte offset")
    body = memoryview(data)[len(MAGIC) + 1:]
    whole, rest = divmod(len(body), FRAME.itemsize)
    if rest:
        offset = len(MAGIC) + 1 + whole * FRAME.itemsize
        raise TimeTagFormatError(
            f"truncated frame ({rest} of {FRAME.itemsize} bytes)", offset, "byte offset"
        )
    frames = np.frombuffer(body, dtype=FRAME, count=whole)
    channel = frames["channel"].copy()
    stamps = frames["timestamp"]
    if whole and stamps.max() >= 2**63:
        bad = int(np.argmax(stamps >= 2**63))
        raise TimeTagFormatError("timestamp exceeds 63 bits", len(MAGIC) + 1 + bad * FRAME.itemsize, "byte offset")
    if max_channel is not None and whole and channel.max() > max_channel:
        bad = int(np.argmax(channel > max_channel))
        raise TimeTagFormatError(
            f"channel {channel[bad]} out of range (max {max_channel})",
            len(MAGIC) + 1 + bad * FRAME.itemsize, "byte offset",
        )
    return TimeTagStream(channel, stamps.astype(np.int64))


def _parse_csv(text: str, max_channel: Optional[int]) -> TimeTagStream:
    channels: list[int] = []
    stamps: list[int] = []
    header_seen = False
    limit = 255 if max_channel is None else max_channel
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.replace(" ", "") != CSV_HEADER:
                raise TimeTagFormatError(f"expected header {CSV_HEADER!r}, got {line!r}", lineno)
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TimeTagFormatError(f"expected 2 fields, got {len(parts)}", lineno)
        try:
            ch, ts = int(parts[0]), int(parts[1])
        except ValueError:
            raise TimeTagFormatError(f"non-integer field in {line!r}", lineno) from None
        if not 0 <= ch <= limit:
            raise TimeTagFormatError(f"channel {ch} out of range (max {limit})", lineno)
        if not 0 <= ts < 2**63:
            raise TimeTagFormatError(f"timestamp {ts} out of range", lineno)
        channels.append(ch)
        stamps.append(ts)
    if not header_seen and text.strip():
        raise TimeTagFormatError("missing header line")
    return TimeTagStream(np.array(channels, dtype=np.uint8), np.array(stamps, dtype=np.int64))


def parse_stream(source, max_channel: Optional[int] = None) -> TimeTagStream:
    """Parse CSV or binary time tags from a path, bytes or file object.

    Binary input is recognised by its magic prefix.  Record order is kept.
    """
    data = _read_source(source)
    if data.startswith(MAGIC):
        return _parse_binary(data, max_channel)
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise TimeTagFormatError("input is neither TTG1 binary nor ASCII CSV", exc.start, "byte offset") from None
    return _parse_csv(text, max_channel)


def _guess_format(sink) -> str:
    if isinstance(sink, (str, os.PathLike)):
        return "binary" if str(sink).endswith((".ttg", ".bin")) else "csv"
    return "csv"


def write_stream(stream: TimeTagStream, sink, fmt: Optional[str] = None, comment: Optional[str] = None) -> None:
    """Write ``stream`` as ``csv`` or ``binary`` (default guessed from the file suffix)."""
    fmt = fmt or _guess_format(sink)
    if fmt == "binary":
        frames = np.empty(len(stream), dtype=FRAME)
        frames["channel"] = stream.channel
        frames["timestamp"] = stream.timestamp.astype(np.uint64)
        payload = MAGIC + bytes([VERSION]) + frames.tobytes()
        if isinstance(sink, (str, os.PathLike)):
            Path(sink).write_bytes(payload)
        else:
            sink.write(payload)
        return
    if fmt != "csv":
        raise ValueError(f"unknown time-tag format {fmt!r}")
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    buf.write(CSV_HEADER + "\n")
    if len(stream):
        body = np.char.add(np.char.add(stream.channel.astype(str), ","), stream.timestamp.astype(str))
        buf.write("\n".join(body.tolist()))
        buf.write("\n")
    text = buf.getvalue()
    if isinstance(sink, (str, os.PathLike)):
        Path(sink).write_text(text)
    elif isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode())


# --- folding and fitting --------------------------------------------------------


def estimate_origin(stream: TimeTagStream, trial_period_ps: int, tau_ps: int) -> int:
    """Folded time of the first slot centre.

    The phase within one bin spacing comes from a circular mean; the first
    populated slot fixes the integer offset.
    """
    if len(stream) == 0:
        return 0
    folded = np.mod(stream.timestamp, trial_period_ps)
    angle = 2 * np.pi * np.mod(folded, tau_ps) / tau_ps
    phase = (math.atan2(np.sin(angle).mean(), np.cos(angle).mean()) % (2 * np.pi)) * tau_ps / (2 * np.pi)
    slot = np.floor((folded - phase + tau_ps / 2) / tau_ps).astype(np.int64)
    counts = np.bincount(slot - slot.min())
    threshold = max(1, int(1e-3 * counts.max()))
    first = int(np.argmax(counts >= threshold)) + int(slot.min())
    return int(round(phase + first * tau_ps))


@dataclass(frozen=True)
class _Folded:
    trial: np.ndarray
    slot: np.ndarray
    offset: np.ndarray  # ps from the nominal slot centre, in [-tau/2, tau/2)


def _fold(stream: TimeTagStream, origin_ps: int, trial_period_ps: int, tau_ps: int) -> _Folded:
    rel = stream.timestamp - origin_ps + tau_ps // 2
    trial = np.floor_divide(rel, trial_period_ps)
    within = rel - trial * trial_period_ps
    slot = within // tau_ps
    offset = within - slot * tau_ps - tau_ps // 2
    return _Folded(trial=trial, slot=slot, offset=offset)


def _gauss_floor(x, amplitude, mean, sigma, floor):
    return amplitude * np.exp(-0.5 * ((x - mean) / sigma) ** 2) + floor


@dataclass(frozen=True)
class BinFit:
    mean_ps: float
    sigma_ps: float
    amplitude: float
    background_floor: float
    fit_residual: float
    events: int
    flag: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.flag is None


def _clipped_location(offsets: np.ndarray, rounds: int = 4, clip: float = 4.0) -> tuple[float, float]:
    """Median and MAD-sigma, re-estimated inside +-clip MAD so a flat floor cannot inflate them."""
    core = offsets
    med = mad = 0.0
    for _ in range(rounds):
        if core.size == 0:
            break
        med = float(np.median(core))
        mad = float(np.median(np.abs(core - med))) * 1.4826
        if mad == 0.0:
            break
        core = offsets[np.abs(offsets - med) <= clip * mad]
    return med, mad


def _fit_one(offsets: np.ndarray, tau_ps: int) -> BinFit:
    n = int(offsets.size)
    if n == 0:
        return BinFit(0.0, 0.0, 0.0, 0.0, math.nan, 0, "empty")
    med, mad = _clipped_location(offsets)
    if n < MIN_FIT_EVENTS:
        return BinFit(med, mad, float(n), 0.0, math.nan, n, "underpopulated")
    if mad < SIGMA_FLOOR_PS:
        return BinFit(med, mad, float(n), 0.0, math.nan, n, "sigma below floor")
    half_range = min(8 * mad, tau_ps / 2)
    lo, hi = med - half_range, med + half_range
    width = max(mad / 5, 1.0)
    edges = np.arange(lo, hi + width, width)
    hist, edges = np.histogram(offsets, bins=edges)
    centres = 0.5 * (edges[1:] + edges[:-1])
    p0 = (float(hist.max()), med, mad, float(np.median(hist[: max(1, len(hist) // 10)])))
    try:
        popt, _ = curve_fit(
            _gauss_floor, centres, hist, p0=p0,
            sigma=np.sqrt(np.maximum(hist, 1)),
            bounds=([0, lo, 1e-3, 0], [np.inf, hi, 4 * half_range, np.inf]),
            maxfev=2000,
        )
        amp, mean, sigma, floor = (float(x) for x in popt)
        model = _gauss_floor(centres, *popt)
        dof = max(len(hist) - 4, 1)
        resid = float(np.sum((hist - model) ** 2 / np.maximum(hist, 1)) / dof)
        flag = None
    except (RuntimeError, ValueError):
        # solver stalled: degrade to robust moments
        amp, mean, sigma, floor, resid, flag = float(hist.max()), med, mad, 0.0, math.nan, "moment fallback"
    if flag is None and not SIGMA_FLOOR_PS <= sigma <= SIGMA_CEIL_PS:
        flag = "sigma out of range"
    return BinFit(mean, sigma, amp, floor, resid, n, flag)


@dataclass
class GaussianFit:
    """Per-bin fits keyed by ``(channel, slot)`` plus the folding geometry."""

    bins: dict
    origin_ps: int
    trial_period_ps: int
    tau_ps: int
    slots: int

    def __getitem__(self, key) -> BinFit:
        return self.bins[key]

    def flagged(self) -> dict:
        return {k: f for k, f in self.bins.items() if not f.ok}

    def sigma_array(self, channel: int) -> np.ndarray:
        return np.array([self.bins[(channel, s)].sigma_ps if (channel, s) in self.bins else np.nan
                         for s in range(self.slots)])

    def report_rows(self) -> list[dict]:
        rows = []
        for (ch, slot), f in sorted(self.bins.items()):
            rows.append({
                "channel": ch, "slot": slot, "events": f.events,
                "mean_ps": round(f.mean_ps, 3), "sigma_ps": round(f.sigma_ps, 3),
                "amplitude": round(f.amplitude, 3), "background_floor": round(f.background_floor, 3),
                "fit_residual": None if math.isnan(f.fit_residual) else round(f.fit_residual, 4),
                "flag": f.flag,
            })
        return rows


def fit_bins(
    records: TimeTagStream,
    trial_period_ps: int,
    bin_count: int,
    tau_ps: int,
    origin_ps: Optional[int] = None,
    channels: Optional[Sequence[int]] = None,
) -> GaussianFit:
    """Fit a Gaussian plus constant floor to every (channel, slot) arrival histogram.

    ``bin_count`` is the number of time slots per channel.  Bins with fewer
    than 50 events, or a width outside [10, 10000] ps, are flagged rather
    than dropped.
    """
    if origin_ps is None:
        origin_ps = estimate_origin(records, trial_period_ps, tau_ps)
    folded = _fold(records, origin_ps, trial_period_ps, tau_ps)
    if channels is None:
        channels = sorted(set(np.unique(records.channel).tolist()))
    keep = (folded.slot >= 0) & (folded.slot < bin_count) & (folded.trial >= 0)
    key = records.channel.astype(np.int64)[keep] * bin_count + folded.slot[keep]
    offs = folded.offset[keep]
    order = np.argsort(key, kind="stable")
    key, offs = key[order], offs[order]
    fits = {}
    for ch in channels:
        for slot in range(bin_count):
            k = ch * bin_count + slot
            lo, hi = np.searchsorted(key, [k, k + 1])
            fits[(ch, slot)] = _fit_one(offs[lo:hi].astype(float), tau_ps)
    return GaussianFit(bins=fits, origin_ps=int(origin_ps), trial_period_ps=int(trial_period_ps),
                       tau_ps=int(tau_ps), slots=int(bin_count))


# --- window plans ------------------------------------------------------------------


@dataclass(frozen=True)
class WindowMode:
    """``static`` with a full width in ps, or ``dynamic`` with a multiple of sigma."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("static", "dynamic"):
            raise ValueError(f"window kind must be static or dynamic, got {self.kind!r}")
        if not self.value > 0:
            raise ValueError("window parameter must be positive")

    @classmethod
    def parse(cls, text: str) -> "WindowMode":
        kind, sep, value = text.partition(":")
        if not sep:
            raise ValueError(f"window spec {text!r} is not of the form static:<ps> or dynamic:<mult>")
        return cls(kind.strip(), float(value))

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.value:g}"


@dataclass
class BinWindowPlan:
    mode: WindowMode
    centers: dict  # (channel, slot) -> offset of the window centre from the nominal slot centre, ps
    half_widths: dict
    origin_ps: int
    trial_period_ps: int
    tau_ps: int
    slots: int

    def arrays(self, channels: Sequence[int]):
        c = np.full((max(channels) + 1, self.slots), np.nan)
        h = np.full_like(c, np.nan)
        for (ch, slot), centre in self.centers.items():
            if ch < c.shape[0]:
                c[ch, slot] = centre
                h[ch, slot] = self.half_widths[(ch, slot)]
        return c, h

    def report_rows(self) -> list[dict]:
        return [
            {"channel": ch, "slot": slot, "center_ps": round(self.centers[(ch, slot)], 3),
             "half_width_ps": round(self.half_widths[(ch, slot)], 3)}
            for ch, slot in sorted(self.centers)
        ]


def plan_windows(fits: GaussianFit, mode: WindowMode) -> BinWindowPlan:
    """Coincidence windows centred on the fitted pulse means.

    The window parameter is a FULL width: ``static:1000`` gives +-500 ps and
    ``dynamic:1.0`` gives +-sigma/2 around each bin's fitted mean.
    """
    if isinstance(mode, str):
        mode = WindowMode.parse(mode)
    centers, halves = {}, {}
    for key, fit in fits.bins.items():
        if mode.kind == "dynamic":
            if fit.events == 0:
                raise ValueError(f"dynamic windows need a fit for bin {key}, which has no events")
            # unresolved pulses are treated as sitting at the resolution floor
            sigma = max(fit.sigma_ps, SIGMA_FLOOR_PS)
            centre, half = fit.mean_ps, 0.5 * mode.value * sigma
        else:
            centre = fit.mean_ps if fit.events else 0.0
            half = 0.5 * mode.value
        if abs(centre) + half > fits.tau_ps / 2:
            raise ValueError(
                f"window for bin {key} (centre {centre:.0f} ps, half width {half:.0f} ps) "
                f"overlaps the neighbouring bin at spacing {fits.tau_ps} ps"
            )
        centers[key] = float(centre)
        halves[key] = float(half)
    return BinWindowPlan(mode=mode, centers=centers, half_widths=halves, origin_ps=fits.origin_ps,
                         trial_period_ps=fits.trial_period_ps, tau_ps=fits.tau_ps, slots=fits.slots)


# --- accumulation --------------------------------------------------------------------


@dataclass
class AccumulationResult:
    joint: JointClickHistogram
    singles: SinglesProfile
    total_events: int
    in_window_events: int
    discarded_events: int
    clicks: int


def default_arm_map(detectors_per_arm: int = 2) -> dict:
    return {"A": list(range(detectors_per_arm)), "B": list(range(detectors_per_arm, 2 * detectors_per_arm))}


def accumulate(
    records: TimeTagStream,
    plan: BinWindowPlan,
    trial_period_ps: Optional[int] = None,
    arm_map: Optional[Mapping[str, Sequence[int]]] = None,
    n_trials: Optional[int] = None,
) -> AccumulationResult:
    """Turn events into per-trial on-off clicks and click-number histograms.

    An event counts for its (channel, slot) bin if it falls inside that bin's
    window; several events in one window make one click.  Everything else is
    tallied as discarded.  ``arm_map`` lists the channels of arm A and arm B;
    detection bins inside an arm are ordered channel by channel.
    """
    arm_map = dict(arm_map or default_arm_map())
    period = int(trial_period_ps or plan.trial_period_ps)
    slots = plan.slots
    all_channels = list(arm_map["A"]) + list(arm_map["B"])
    centres, halves = plan.arrays(all_channels)
    folded = _fold(records, plan.origin_ps, period, plan.tau_ps)
    ch = records.channel.astype(np.int64)
    valid = (folded.trial >= 0) & (folded.slot >= 0) & (folded.slot < slots) & (ch < centres.shape[0])
    if n_trials is not None:
        valid &= folded.trial < n_trials
    idx_ch = np.where(valid, ch, 0)
    idx_slot = np.where(valid, folded.slot, 0)
    centre = centres[idx_ch, idx_slot]
    half = halves[idx_ch, idx_slot]
    with np.errstate(invalid="ignore"):
        inside = valid & ~np.isnan(centre) & (np.abs(folded.offset - centre) <= half)
    total = len(records)
    in_window = int(inside.sum())
    if n_trials is None:
        n_trials = int(folded.trial[inside].max()) + 1 if in_window else 0

    arm_of = np.full(centres.shape[0], -1, dtype=np.int64)
    pos_of = np.zeros(centres.shape[0], dtype=np.int64)
    for arm_index, name in enumerate(("A", "B")):
        for pos, c in enumerate(arm_map[name]):
            arm_of[c] = arm_index
            pos_of[c] = pos
    md = [len(arm_map[name]) * slots for name in ("A", "B")]
    per_arm, singles = [], []
    for arm_index in (0, 1):
        sel = inside & (arm_of[idx_ch] == arm_index)
        b = pos_of[ch[sel]] * slots + folded.slot[sel]
        keys = np.unique(folded.trial[sel] * md[arm_index] + b)
        per_arm.append(np.bincount(keys // md[arm_index], minlength=n_trials))
        singles.append(np.bincount(keys % md[arm_index], minlength=md[arm_index]))
    if md[0] != md[1]:
        raise ValueError("both arms need the same number of detection bins")
    joint = np.bincount(per_arm[0] * (md[1] + 1) + per_arm[1], minlength=(md[0] + 1) * (md[1] + 1))
    clicks = int(per_arm[0].sum() + per_arm[1].sum())
    return AccumulationResult(
        joint=JointClickHistogram(md[0], md[1], joint.reshape(md[0] + 1, md[1] + 1)),
        singles=SinglesProfile(np.concatenate(singles), md[0]),
        total_events=total,
        in_window_events=in_window,
        discarded_events=total - in_window,
        clicks=clicks,
    )
