"""Receptive-field algebra, tile plans, tiled execution and activation-memory accounting.

Tiling splits the final conv output into slices, maps each slice back to the
input range it depends on, runs the whole stack on that sub-window and writes
the result into a shared output buffer. Halo samples shared by neighbouring
slices are recomputed, never cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidSliceCount, PlanConsistencyError, StalePlan
from .nn import (
    BYTES_PER_VALUE,
    DTYPE,
    ConvLayerSpec,
    ModelSpec,
    as_planar,
    conv1d_forward,
    head_forward,
    layer_lengths,
)


@dataclass(frozen=True)
class IndexRange:
    """Inclusive index range ``[start, end]``."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"empty range [{self.start}, {self.end}]")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def to_list(self) -> list[int]:
        return [self.start, self.end]


def layer_receptive_range(out_range: IndexRange, layer: ConvLayerSpec) -> IndexRange:
    return IndexRange(
        out_range.start * layer.stride,
        out_range.end * layer.stride + (layer.kernel - 1) * layer.dilation,
    )


def stack_receptive_range(out_range: IndexRange, conv_layers: Sequence[ConvLayerSpec]) -> IndexRange:
    r = out_range
    for layer in reversed(conv_layers):
        r = layer_receptive_range(r, layer)
    return r


def receptive_field(conv_layers: Sequence[ConvLayerSpec]) -> tuple[int, int]:
    """Return ``(jump, size)``: input step between adjacent outputs and samples seen by one output."""
    jump, size = 1, 1
    for layer in conv_layers:
        size += (layer.kernel - 1) * layer.dilation * jump
        jump *= layer.stride
    return jump, size


@dataclass(frozen=True)
class TileSlice:
    out_range: IndexRange
    in_range: IndexRange
    per_layer_ranges: tuple[IndexRange, ...]


@dataclass(frozen=True)
class TilePlan:
    n_slices: int
    slices: tuple[TileSlice, ...]
    window_samples: int
    final_length: int
    geometry: tuple = field(repr=False, compare=True)

    def to_dict(self) -> dict:
        return {
            "n_slices": self.n_slices,
            "window_samples": self.window_samples,
            "final_length": self.final_length,
            "slices": [
                {
                    "out_range": s.out_range.to_list(),
                    "in_range": s.in_range.to_list(),
                    "per_layer_ranges": [r.to_list() for r in s.per_layer_ranges],
                }
                for s in self.slices
            ],
        }


def split_lengths(total: int, n: int) -> list[int]:
    """Near-equal split; the first ``total % n`` parts get one extra element."""
    base, extra = divmod(total, n)
    return [base + 1 if i < extra else base for i in range(n)]


def make_tile_plan(model: ModelSpec, n_slices: int) -> TilePlan:
    lengths = layer_lengths(model.window_samples, model.conv_layers)
    final = lengths[-1]
    if not isinstance(n_slices, (int, np.integer)) or not 1 <= n_slices <= final:
        raise InvalidSliceCount(f"invalid slice count {n_slices!r}: must be in [1, {final}]")
    slices = []
    start = 0
    for size in split_lengths(final, int(n_slices)):
        out = IndexRange(start, start + size - 1)
        start += size
        # ranges[k] is the needed range of stage k's output; stage 0 is the input
        ranges = [out]
        for layer in reversed(model.conv_layers):
            ranges.append(layer_receptive_range(ranges[-1], layer))
        ranges.reverse()
        for r, n in zip(ranges, lengths):
            if r.start < 0 or r.end > n - 1:
                raise PlanConsistencyError(f"receptive range {r.to_list()} escapes a buffer of length {n}")
        slices.append(TileSlice(out_range=out, in_range=ranges[0], per_layer_ranges=tuple(ranges[1:])))
    return TilePlan(
        n_slices=int(n_slices),
        slices=tuple(slices),
        window_samples=model.window_samples,
        final_length=final,
        geometry=model.geometry(),
    )


def check_plan(model: ModelSpec, plan: TilePlan) -> None:
    if plan.geometry != model.geometry():
        raise StalePlan("stale plan: built for a different model geometry or window size")


def tiled_conv_stack(x: np.ndarray, model: ModelSpec, plan: TilePlan) -> np.ndarray:
    """Run the conv stack slice by slice; returns the concatenated final activation."""
    check_plan(model, plan)
    x = as_planar(x, channels=1)
    if x.shape[1] != plan.window_samples:
        raise StalePlan(f"stale plan: built for {plan.window_samples}-sample windows, got {x.shape[1]}")
    out = np.empty((model.final_channels, plan.final_length), dtype=DTYPE)
    for s in plan.slices:
        act = x[:, s.in_range.start:s.in_range.end + 1]
        for layer, needed in zip(model.conv_layers, s.per_layer_ranges):
            # the sub-window starts exactly at needed.start * stride, so the local
            # output already equals the needed range; the slice is a guard
            act = conv1d_forward(act, layer)[:, :len(needed)]
        out[:, s.out_range.start:s.out_range.end + 1] = act
    return out


def tiled_forward(window, model: ModelSpec, plan: TilePlan) -> tuple[np.ndarray, str]:
    return head_forward(tiled_conv_stack(window, model, plan), model)


@dataclass(frozen=True)
class MemoryStep:
    label: str
    live_bytes: int


@dataclass(frozen=True)
class MemoryReport:
    steps: tuple[MemoryStep, ...]
    assumptions: str
    n_slices: int | None = None

    @property
    def peak_bytes(self) -> int:
        return max(s.live_bytes for s in self.steps)

    @property
    def peak_step(self) -> MemoryStep:
        return max(self.steps, key=lambda s: s.live_bytes)

    def to_dict(self) -> dict:
        return {
            "n_slices": self.n_slices,
            "peak_bytes": self.peak_bytes,
            "assumptions": self.assumptions,
            "steps": [{"label": s.label, "live_bytes": s.live_bytes} for s in self.steps],
        }


BUFFER_MODEL = (
    "buffers live from production until their last consumer finishes; a layer's input and output "
    "coexist; {n} bytes per value; weights excluded (flash-resident); the standardized input window "
    "counts as a buffer; tiled runs keep a persistent final-output buffer that the last conv writes into"
).format(n=BYTES_PER_VALUE)


def peak_activation_bytes(model: ModelSpec, plan: TilePlan | None = None) -> MemoryReport:
    """Simulate activation-buffer lifetimes for one forward pass."""
    channels = [1] + [l.out_channels for l in model.conv_layers]
    n_classes = model.dense.out_features
    final_elems = model.final_channels * model.final_length
    steps: list[MemoryStep] = []

    def add(label, elems):
        steps.append(MemoryStep(label, int(elems) * BYTES_PER_VALUE))

    if plan is None:
        sizes = [c * n for c, n in zip(channels, layer_lengths(model.window_samples, model.conv_layers))]
        add("input", sizes[0])
        for i in range(len(model.conv_layers)):
            add(f"conv{i + 1}", sizes[i] + sizes[i + 1])
        resident = 0
    else:
        check_plan(model, plan)
        resident = final_elems
        for k, s in enumerate(plan.slices):
            sizes = [len(s.in_range)] + [c * len(r) for c, r in zip(channels[1:], s.per_layer_ranges)]
            add(f"slice{k}/input", resident + sizes[0])
            for i in range(len(model.conv_layers)):
                last = i == len(model.conv_layers) - 1
                # the last conv writes straight into the resident buffer
                add(f"slice{k}/conv{i + 1}", resident + sizes[i] + (0 if last else sizes[i + 1]))
    add("dense", final_elems + n_classes)
    add("softmax", 2 * n_classes)
    return MemoryReport(tuple(steps), BUFFER_MODEL, None if plan is None else plan.n_slices)


def smallest_slices_for_budget(model: ModelSpec, budget_bytes: int) -> tuple[int | None, list[tuple[int, int]]]:
    """Linear scan n = 1.. for the first plan whose tiled peak fits the budget.

    Returns ``(n or None, [(n, peak_bytes), ...])`` listing every plan tried.
    """
    tried = []
    for n in range(1, model.final_length + 1):
        peak = peak_activation_bytes(model, make_tile_plan(model, n)).peak_bytes
        tried.append((n, peak))
        if peak <= budget_bytes:
            return n, tried
    return None, tried
