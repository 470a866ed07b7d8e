"""Streaming runtime: windowing, standardization and the two firmware behaviours.

``analyse_and_record`` logs one classification per window (continuous mode,
F2). ``detection_cycle`` counts argmax classes over a fixed-length cycle and
fires when a single positive class reaches the threshold (triggered recording,
F1). Windows are consecutive and non-overlapping; a trailing partial window
is dropped.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, EmptyWindow, SmartPamError
from .nn import DTYPE, ModelSpec, model_forward
from .tiler import TilePlan, tiled_forward

STD_EPSILON = 1e-8


@dataclass
class AudioStream:
    samples: np.ndarray
    sample_rate_hz: int = 24000

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1:
            raise SmartPamError("audio stream must be one-dimensional (mono)")
        if s.size and (s.min() < -32768 or s.max() > 32767):
            raise SmartPamError("samples outside the signed 16-bit range")
        self.samples = s.astype(np.int16)
        if self.sample_rate_hz < 1:
            raise SmartPamError("sample rate must be positive")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


def window_duration_ms(window_samples: int, sample_rate_hz: int) -> float:
    return window_samples * 1000.0 / sample_rate_hz


def window_start_ms(index: int, window_samples: int, sample_rate_hz: int) -> float:
    return index * window_samples * 1000.0 / sample_rate_hz


def standardize_window(raw) -> np.ndarray:
    """Z-score one window (population std). Near-constant input maps to zeros."""
    x = np.asarray(raw, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise EmptyWindow("empty window")
    centred = x - x.mean()
    std = np.sqrt(np.mean(centred * centred))
    if std < STD_EPSILON:
        return np.zeros((1, x.size), dtype=DTYPE)
    return (centred / std).astype(DTYPE)[np.newaxis, :]


def count_windows(n_samples: int, window_samples: int) -> int:
    return n_samples // window_samples


def windows(stream: AudioStream, window_samples: int) -> Iterator[np.ndarray]:
    if window_samples < 1:
        raise SmartPamError("window_samples must be at least 1")
    s = stream.samples
    for i in range(count_windows(len(s), window_samples)):
        yield s[i * window_samples:(i + 1) * window_samples]


def check_rate(stream: AudioStream, model: ModelSpec) -> None:
    if stream.sample_rate_hz != model.sample_rate_hz:
        warnings.warn(
            f"stream is {stream.sample_rate_hz} Hz but the model expects {model.sample_rate_hz} Hz; "
            f"durations use {stream.sample_rate_hz} Hz",
            stacklevel=3,
        )


def classify(raw, model: ModelSpec, plan: TilePlan | None = None) -> tuple[np.ndarray, str]:
    x = standardize_window(raw)
    if plan is None:
        return model_forward(x, model)
    return tiled_forward(x, model, plan)


@dataclass(frozen=True)
class WindowRecord:
    index: int
    t_start_ms: float
    label: str
    probabilities: tuple[float, ...]

    def to_line(self) -> str:
        probs = ",".join(f"{p:.6f}" for p in self.probabilities)
        return f"{self.index},{self.t_start_ms:.3f},{self.label},{probs}"


def parse_record_line(line: str, n_classes: int) -> WindowRecord:
    parts = line.strip().split(",")
    if len(parts) != 3 + n_classes:
        raise SmartPamError(f"log line has {len(parts)} fields, expected {3 + n_classes}")
    return WindowRecord(int(parts[0]), float(parts[1]), parts[2], tuple(float(p) for p in parts[3:]))


def iter_records(stream: AudioStream, model: ModelSpec, plan: TilePlan | None = None) -> Iterator[WindowRecord]:
    w = model.window_samples
    for i, raw in enumerate(windows(stream, w)):
        probs, label = classify(raw, model, plan)
        yield WindowRecord(i, window_start_ms(i, w, stream.sample_rate_hz), label, tuple(float(p) for p in probs))


def analyse_and_record(stream: AudioStream, model: ModelSpec, plan: TilePlan | None = None) -> list[WindowRecord]:
    check_rate(stream, model)
    return list(iter_records(stream, model, plan))


@dataclass(frozen=True)
class DetectionConfig:
    cycle_seconds: float = 10.0
    threshold: int = 30
    positive_classes: tuple[str, ...] = ("male", "female", "chick")

    def __post_init__(self):
        if self.cycle_seconds <= 0:
            raise ConfigError("cycle_seconds must be positive")
        if int(self.threshold) != self.threshold or self.threshold < 1:
            raise ConfigError("threshold must be a positive integer")
        object.__setattr__(self, "positive_classes", tuple(self.positive_classes))

    def windows_per_cycle(self, window_samples: int, sample_rate_hz: int) -> int:
        n = int(self.cycle_seconds * sample_rate_hz) // window_samples
        if self.threshold > n:
            raise ConfigError(f"threshold {self.threshold} exceeds the {n} windows in one cycle")
        return n


@dataclass
class DetectionOutcome:
    triggered: bool
    trigger_class: str | None
    counts: dict[str, int]
    windows_evaluated: int
    cycle_index: int = 0
    start_window: int = 0

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle_index,
            "start_window": self.start_window,
            "triggered": self.triggered,
            "trigger_class": self.trigger_class,
            "windows_evaluated": self.windows_evaluated,
            "counts": dict(self.counts),
        }


def trigger_decision(counts: dict[str, int], config: DetectionConfig) -> str | None:
    """Positive class with count >= threshold; highest count wins, ties by class order."""
    best = None
    for label in config.positive_classes:
        c = counts.get(label, 0)
        if c >= config.threshold and (best is None or c > counts[best]):
            best = label
    return best


class DetectionCounter:
    """Per-cycle class counter. Feed argmax labels; it reports the trigger."""

    def __init__(self, class_labels: Sequence[str], config: DetectionConfig):
        self.config = config
        self.counts = {label: 0 for label in class_labels}
        self.evaluated = 0
        self.trigger_class: str | None = None

    def update(self, label: str) -> str | None:
        self.counts[label] = self.counts.get(label, 0) + 1
        self.evaluated += 1
        if self.trigger_class is None:
            self.trigger_class = trigger_decision(self.counts, self.config)
        return self.trigger_class

    def outcome(self, cycle_index: int = 0, start_window: int = 0) -> DetectionOutcome:
        return DetectionOutcome(
            triggered=self.trigger_class is not None,
            trigger_class=self.trigger_class,
            counts=dict(self.counts),
            windows_evaluated=self.evaluated,
            cycle_index=cycle_index,
            start_window=start_window,
        )


def run_cycle(
    raw_windows: Sequence[np.ndarray],
    model: ModelSpec,
    plan: TilePlan | None,
    config: DetectionConfig,
    early_exit: bool = True,
) -> DetectionCounter:
    counter = DetectionCounter(model.class_labels, config)
    for raw in raw_windows:
        _, label = classify(raw, model, plan)
        if counter.update(label) and early_exit:
            break
    return counter


def detection_cycle(
    stream: AudioStream,
    model: ModelSpec,
    plan: TilePlan | None = None,
    config: DetectionConfig = DetectionConfig(),
    early_exit: bool = True,
) -> DetectionOutcome:
    """Run one detection cycle over the start of ``stream``."""
    check_rate(stream, model)
    n = config.windows_per_cycle(model.window_samples, stream.sample_rate_hz)
    raw = list(windows(stream, model.window_samples))[:n]
    return run_cycle(raw, model, plan, config, early_exit).outcome()


def detection_cycles(
    stream: AudioStream,
    model: ModelSpec,
    plan: TilePlan | None = None,
    config: DetectionConfig = DetectionConfig(),
    early_exit: bool = True,
) -> list[DetectionOutcome]:
    """Split the stream into back-to-back cycles (counts reset each cycle); a short last cycle is kept."""
    check_rate(stream, model)
    n = config.windows_per_cycle(model.window_samples, stream.sample_rate_hz)
    raw = list(windows(stream, model.window_samples))
    outcomes = []
    for k, start in enumerate(range(0, len(raw), n)):
        counter = run_cycle(raw[start:start + n], model, plan, config, early_exit)
        outcomes.append(counter.outcome(cycle_index=k, start_window=start))
    return outcomes
