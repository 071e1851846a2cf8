"""Experiment configuration: defaults, validation and JSON loading."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

CONFIG_VERSION = 1

# Pump power -> mean pairs per pulse.  Linear low-gain reference table, not a
# calibrated source model; pass mean_pairs directly for anything else.
PAIRS_PER_MICROWATT = 0.006
REFERENCE_PUMP_POWERS_UW = (15.0, 50.0, 150.0, 500.0, 1000.0)


def mean_pairs_for_pump(power_uw: float) -> float:
    if power_uw < 0:
        raise ValueError("pump power must be nonnegative")
    return PAIRS_PER_MICROWATT * power_uw


class ConfigError(ValueError):
    """Raised with the offending field name for schema violations."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    config_version: int = CONFIG_VERSION
    network_bins: int = 128
    detectors_per_arm: int = 2
    bin_separation_ns: float = 100.0
    trial_period_ns: float = 20_000.0
    time_origin_ps: int = 250_000
    dead_time_ns: float = 60.0
    mean_pairs: float = 3.0
    schmidt_modes: float = 10.0
    fixed_pairs: Optional[int] = None
    transmission_a: float = 0.861
    transmission_b: float = 0.813
    detector_efficiency: float = 0.90
    background_click_prob: float = 5e-4
    bin_efficiency_variation: float = 0.07
    pulse_width_min_ps: float = 70.0
    pulse_width_max_ps: float = 700.0
    timing_jitter: bool = True
    trials: int = 1_000_000
    rng_seed: int = 12345
    pump_power_uw: Optional[float] = None

    def __post_init__(self):
        self.validate()

    # --- derived quantities -------------------------------------------------
    @property
    def slots(self) -> int:
        return self.network_bins // self.detectors_per_arm

    @property
    def tau_ps(self) -> int:
        return int(round(self.bin_separation_ns * 1000))

    @property
    def trial_period_ps(self) -> int:
        return int(round(self.trial_period_ns * 1000))

    def arm_transmission(self, arm: int) -> float:
        return (self.transmission_a, self.transmission_b)[arm]

    def validate(self) -> None:
        if self.config_version != CONFIG_VERSION:
            raise ConfigError("config_version", f"unsupported version {self.config_version}")
        _positive_int(self, "network_bins")
        _positive_int(self, "detectors_per_arm")
        if self.network_bins % self.detectors_per_arm:
            raise ConfigError("network_bins", "must be divisible by detectors_per_arm")
        for name in ("transmission_a", "transmission_b", "detector_efficiency"):
            _probability(self, name)
        _probability(self, "background_click_prob", upper_open=True)
        v = self.bin_efficiency_variation
        if not 0.0 <= v < 2.0:
            raise ConfigError("bin_efficiency_variation", f"{v} outside [0, 2)")
        if self.mean_pairs < 0:
            raise ConfigError("mean_pairs", "must be nonnegative")
        if self.schmidt_modes <= 0:
            raise ConfigError("schmidt_modes", "must be positive")
        if self.fixed_pairs is not None and (int(self.fixed_pairs) != self.fixed_pairs or self.fixed_pairs < 0):
            raise ConfigError("fixed_pairs", "must be a nonnegative integer or null")
        if self.bin_separation_ns <= 0:
            raise ConfigError("bin_separation_ns", "must be positive")
        if self.bin_separation_ns < self.dead_time_ns:
            raise ConfigError(
                "bin_separation_ns",
                f"{self.bin_separation_ns} ns is shorter than the detector dead time {self.dead_time_ns} ns",
            )
        if not 0 < self.pulse_width_min_ps <= self.pulse_width_max_ps:
            raise ConfigError("pulse_width_min_ps", "need 0 < pulse_width_min_ps <= pulse_width_max_ps")
        if self.pulse_width_max_ps * 10 > self.tau_ps:
            raise ConfigError("pulse_width_max_ps", "pulses wider than a tenth of the bin spacing overlap")
        if self.time_origin_ps < self.tau_ps // 2:
            raise ConfigError("time_origin_ps", "must leave at least half a bin spacing before the first bin")
        if self.time_origin_ps + self.slots * self.tau_ps > self.trial_period_ps:
            raise ConfigError("trial_period_ns", "all time bins must fit inside one trial period")
        if int(self.trials) != self.trials or self.trials < 0:
            raise ConfigError("trials", "must be a nonnegative integer")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigError("rng_seed", "must be an unsigned 64-bit integer")

    # --- serialisation --------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        if "config_version" not in data:
            raise ConfigError("config_version", "missing (required)")
        kwargs = {}
        for name, value in data.items():
            default = known[name].default
            kwargs[name] = _coerce(name, value, default)
        if "mean_pairs" not in data and kwargs.get("pump_power_uw") is not None:
            kwargs["mean_pairs"] = mean_pairs_for_pump(kwargs["pump_power_uw"])
        return cls(**kwargs)


def _coerce(name: str, value: Any, default: Any) -> Any:
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) or name == "fixed_pairs":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float) or default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    return value


def _positive_int(cfg, name):
    value = getattr(cfg, name)
    if int(value) != value or value < 1:
        raise ConfigError(name, f"must be a positive integer, got {value!r}")


def _probability(cfg, name, upper_open=False):
    value = getattr(cfg, name)
    ok = 0.0 <= value < 1.0 if upper_open else 0.0 <= value <= 1.0
    if not ok:
        bound = "[0, 1)" if upper_open else "[0, 1]"
        raise ConfigError(name, f"{value} outside {bound}")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError("<file>", "top level must be an object")
    return ExperimentConfig.from_dict(data)
