"""Device profile files: INI text with the unit in every key name."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .device import STAGES, DeviceProfile, TimingModel
from .errors import ConfigError
from .modelfile import atomic_write
from .stream import DetectionConfig


@dataclass(frozen=True)
class SimConfig:
    profile: DeviceProfile = field(default_factory=DeviceProfile)
    timing: TimingModel = field(default_factory=TimingModel)
    detection: DetectionConfig = field(default_factory=DetectionConfig)


def dumps_config(cfg: SimConfig) -> str:
    p, t, d = cfg.profile, cfg.timing, cfg.detection
    parser = configparser.ConfigParser()
    parser["device"] = {
        "supply_voltage_v": repr(p.supply_voltage_v),
        "shunt_ohms": repr(p.shunt_ohms),
        "baseline_cycle_mj": repr(p.baseline_cycle_mj),
        "smart_cycle_mj": repr(p.smart_cycle_mj),
    }
    parser["currents"] = {f"current_{s}_ma": repr(float(p.stage_current_ma[s])) for s in STAGES}
    parser["timing"] = {
        "window_ms": repr(t.window_ms),
        "preprocess_ms": repr(t.preprocess_ms),
        "inference_ms": repr(t.inference_ms),
    }
    if p.measured_stage_durations_ms:
        parser["measured_durations"] = {f"{k}_ms": repr(float(v)) for k, v in sorted(p.measured_stage_durations_ms.items())}
    parser["detection"] = {
        "cycle_seconds": repr(float(d.cycle_seconds)),
        "threshold": str(d.threshold),
        "positive_classes": ", ".join(d.positive_classes),
    }
    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in parser[section].items()]
        lines.append("")
    return "\n".join(lines)


def loads_config(text: str) -> SimConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable profile: {exc.message}") from None
    defaults = SimConfig()

    def num(section, key, fallback, kind=float):
        if not parser.has_option(section, key):
            return fallback
        raw = parser.get(section, key)
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None

    p = defaults.profile
    currents = {s: num("currents", f"current_{s}_ma", p.stage_current_ma[s]) for s in STAGES}
    measured = None
    if parser.has_section("measured_durations"):
        measured = {}
        for key in parser.options("measured_durations"):
            if not key.endswith("_ms"):
                raise ConfigError(f"[measured_durations] {key}: keys must end in _ms")
            measured[key[:-3]] = num("measured_durations", key, 0.0)
    profile = DeviceProfile(
        supply_voltage_v=num("device", "supply_voltage_v", p.supply_voltage_v),
        shunt_ohms=num("device", "shunt_ohms", p.shunt_ohms),
        stage_current_ma=currents,
        measured_stage_durations_ms=measured,
        baseline_cycle_mj=num("device", "baseline_cycle_mj", p.baseline_cycle_mj),
        smart_cycle_mj=num("device", "smart_cycle_mj", p.smart_cycle_mj),
    )
    t = defaults.timing
    timing = TimingModel(
        window_ms=num("timing", "window_ms", t.window_ms),
        preprocess_ms=num("timing", "preprocess_ms", t.preprocess_ms),
        inference_ms=num("timing", "inference_ms", t.inference_ms),
    )
    d = defaults.detection
    classes = d.positive_classes
    if parser.has_option("detection", "positive_classes"):
        classes = tuple(c.strip() for c in parser.get("detection", "positive_classes").split(",") if c.strip())
    detection = DetectionConfig(
        cycle_seconds=num("detection", "cycle_seconds", d.cycle_seconds),
        threshold=num("detection", "threshold", d.threshold, int),
        positive_classes=classes,
    )
    return SimConfig(profile, timing, detection)


def load_config(path) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read profile {path}: {exc.strerror}") from None


def save_config(cfg: SimConfig, path) -> None:
    atomic_write(path, dumps_config(cfg))
