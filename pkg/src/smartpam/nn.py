"""Deterministic float32 forward pass for raw-waveform 1D CNNs.

Activations are planar arrays of shape ``(channels, length)`` (channel-major,
float32). All convolutions use VALID padding: an output position exists only
where every dilated tap lands inside the input, so

    out_len = (in_len - ((kernel - 1) * dilation + 1)) // stride + 1

The accumulation order inside :func:`conv1d_forward` is fixed (bias first,
then input channels in order, taps innermost) and every output element is
computed independently of its neighbours. Running the same layer on a
sub-window therefore reproduces the matching output columns bit for bit,
which is what tiled execution relies on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ChannelMismatch, FeatureCountMismatch, InvalidModel, WindowTooShort

DTYPE = np.float32
BYTES_PER_VALUE = 4
DEFAULT_CLASS_LABELS = ("male", "female", "chick", "noise")
DEFAULT_SAMPLE_RATE_HZ = 24000


class Activation(str, enum.Enum):
    RELU = "relu"
    NONE = "none"


def as_planar(x, channels: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a float32 ``(channels, length)`` array.

    A 1-D input is treated as a single channel.
    """
    arr = np.asarray(x, dtype=DTYPE)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ChannelMismatch(f"channel mismatch: expected a (channels, length) array, got shape {arr.shape}")
    if channels is not None and arr.shape[0] != channels:
        raise ChannelMismatch(f"channel mismatch: expected {channels} channels, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidModel("non-finite values in activation")
    return arr


def _array(values, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=DTYPE)
    if arr.shape != shape:
        if arr.size == int(np.prod(shape)):
            arr = arr.reshape(shape)
        else:
            raise InvalidModel(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidModel(f"{what}: non-finite values")
    return np.ascontiguousarray(arr)


class _Parameters:
    """Keeps ``weights`` and ``bias`` float32 even when reassigned after construction."""

    def __setattr__(self, name, value):
        if name in ("weights", "bias") and value is not None:
            value = np.asarray(value, dtype=DTYPE)
            if self.__dict__.get("_built"):
                value = _array(value, self.__dict__[name].shape, name)
        object.__setattr__(self, name, value)


@dataclass(eq=False)
class ConvLayerSpec(_Parameters):
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    dilation: int = 1
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    activation: Activation = Activation.RELU

    def __post_init__(self):
        for name in ("in_channels", "out_channels", "kernel", "stride", "dilation"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidModel(f"conv layer {name} must be a positive integer, got {value!r}")
            setattr(self, name, int(value))
        self.activation = Activation(self.activation)
        shape = (self.out_channels, self.in_channels, self.kernel)
        if self.weights is None:
            self.weights = np.zeros(shape, dtype=DTYPE)
        if self.bias is None:
            self.bias = np.zeros(self.out_channels, dtype=DTYPE)
        self.weights = _array(self.weights, shape, "conv weights")
        self.bias = _array(self.bias, (self.out_channels,), "conv bias")
        self._built = True

    @property
    def extent(self) -> int:
        """Span of input samples covered by one output position."""
        return (self.kernel - 1) * self.dilation + 1

    @property
    def param_count(self) -> int:
        return self.out_channels * self.in_channels * self.kernel + self.out_channels

    def geometry(self) -> tuple:
        return (self.in_channels, self.out_channels, self.kernel, self.stride, self.dilation)


@dataclass(eq=False)
class DenseSpec(_Parameters):
    in_features: int
    out_features: int
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None

    def __post_init__(self):
        for name in ("in_features", "out_features"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidModel(f"dense {name} must be a positive integer, got {value!r}")
            setattr(self, name, int(value))
        shape = (self.out_features, self.in_features)
        if self.weights is None:
            self.weights = np.zeros(shape, dtype=DTYPE)
        if self.bias is None:
            self.bias = np.zeros(self.out_features, dtype=DTYPE)
        self.weights = _array(self.weights, shape, "dense weights")
        self.bias = _array(self.bias, (self.out_features,), "dense bias")
        self._built = True

    @property
    def param_count(self) -> int:
        return self.out_features * self.in_features + self.out_features


@dataclass(eq=False)
class ModelSpec:
    conv_layers: list[ConvLayerSpec]
    dense: DenseSpec
    window_samples: int
    class_labels: tuple[str, ...] = DEFAULT_CLASS_LABELS
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        self.conv_layers = list(self.conv_layers)
        self.class_labels = tuple(str(c) for c in self.class_labels)
        if len(set(self.class_labels)) != len(self.class_labels) or not self.class_labels:
            raise InvalidModel("class labels must be non-empty and unique")
        if self.window_samples < 1 or self.sample_rate_hz < 1:
            raise InvalidModel("window_samples and sample_rate_hz must be positive")
        channels = 1
        for i, layer in enumerate(self.conv_layers):
            if layer.in_channels != channels:
                raise InvalidModel(
                    f"conv layer {i} expects {layer.in_channels} input channels, previous stage gives {channels}"
                )
            channels = layer.out_channels
        lengths = layer_lengths(self.window_samples, self.conv_layers)
        flat = lengths[-1] * channels
        if self.dense.in_features != flat:
            raise InvalidModel(f"dense layer expects {self.dense.in_features} features, conv stack yields {flat}")
        if self.dense.out_features != len(self.class_labels):
            raise InvalidModel(
                f"dense layer has {self.dense.out_features} outputs for {len(self.class_labels)} class labels"
            )

    @property
    def final_channels(self) -> int:
        return self.conv_layers[-1].out_channels if self.conv_layers else 1

    @property
    def final_length(self) -> int:
        return layer_lengths(self.window_samples, self.conv_layers)[-1]

    @property
    def window_ms(self) -> float:
        return self.window_samples * 1000.0 / self.sample_rate_hz

    def geometry(self) -> tuple:
        return (self.window_samples, tuple(layer.geometry() for layer in self.conv_layers))


def output_length(in_length: int, layer: ConvLayerSpec) -> int:
    if in_length < layer.extent:
        raise WindowTooShort(
            f"window too short for layer: {in_length} samples < kernel extent {layer.extent}"
        )
    return (in_length - layer.extent) // layer.stride + 1


def layer_lengths(in_length: int, layers: Sequence[ConvLayerSpec]) -> list[int]:
    """Lengths of the input followed by every conv output."""
    lengths = [in_length]
    for layer in layers:
        lengths.append(output_length(lengths[-1], layer))
    return lengths


def conv1d_forward(x, layer: ConvLayerSpec) -> np.ndarray:
    x = as_planar(x)
    if x.shape[0] != layer.in_channels:
        raise ChannelMismatch(
            f"channel mismatch: layer expects {layer.in_channels} channels, input has {x.shape[0]}"
        )
    n = output_length(x.shape[1], layer)
    span = layer.stride * (n - 1) + 1
    w = layer.weights
    acc = np.repeat(layer.bias[:, np.newaxis], n, axis=1)
    for ci in range(layer.in_channels):
        row = x[ci]
        for t in range(layer.kernel):
            off = t * layer.dilation
            acc += w[:, ci, t, np.newaxis] * row[off:off + span:layer.stride]
    if layer.activation is Activation.RELU:
        np.maximum(acc, 0, out=acc)
    return acc


def conv_stack_forward(x, layers: Sequence[ConvLayerSpec]) -> np.ndarray:
    out = as_planar(x)
    for layer in layers:
        out = conv1d_forward(out, layer)
    return out


def dense_forward(features, dense: DenseSpec) -> np.ndarray:
    """Affine head; no activation. Accumulates features in index order."""
    v = np.asarray(features, dtype=DTYPE).reshape(-1)
    if v.shape[0] != dense.in_features:
        raise FeatureCountMismatch(
            f"feature-count mismatch: dense expects {dense.in_features}, got {v.shape[0]}"
        )
    acc = dense.bias.copy()
    w = dense.weights
    for i in range(dense.in_features):
        acc += w[:, i] * v[i]
    return acc


def softmax(logits) -> np.ndarray:
    """Max-shifted softmax. Normalisation runs in float64."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(z - z.max())
    return e / e.sum()


def head_forward(final_activation: np.ndarray, model: ModelSpec) -> tuple[np.ndarray, str]:
    logits = dense_forward(final_activation.reshape(-1), model.dense)
    probs = softmax(logits)
    # np.argmax returns the first maximum: ties go to the lowest class index.
    return probs, model.class_labels[int(np.argmax(probs))]


def model_forward(window, model: ModelSpec) -> tuple[np.ndarray, str]:
    x = as_planar(window, channels=1)
    if x.shape[1] != model.window_samples:
        raise WindowTooShort(f"model expects {model.window_samples} samples per window, got {x.shape[1]}")
    return head_forward(conv_stack_forward(x, model.conv_layers), model)


@dataclass(frozen=True)
class ParamCount:
    conv: int
    dense: int
    total: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.conv + self.dense)


def param_count(model: ModelSpec) -> ParamCount:
    return ParamCount(sum(l.param_count for l in model.conv_layers), model.dense.param_count)


def model_size_bytes(model: ModelSpec) -> int:
    return param_count(model).total * BYTES_PER_VALUE


def models_equal(a: ModelSpec, b: ModelSpec) -> bool:
    """Field-for-field, bit-for-bit equality (``-0.0 != 0.0``, NaN-free by construction)."""
    if (a.window_samples, a.sample_rate_hz, a.class_labels) != (b.window_samples, b.sample_rate_hz, b.class_labels):
        return False
    if len(a.conv_layers) != len(b.conv_layers):
        return False
    for la, lb in zip(a.conv_layers, b.conv_layers):
        if la.geometry() != lb.geometry() or la.activation != lb.activation:
            return False
        if la.weights.tobytes() != lb.weights.tobytes() or la.bias.tobytes() != lb.bias.tobytes():
            return False
    return (
        a.dense.weights.tobytes() == b.dense.weights.tobytes()
        and a.dense.bias.tobytes() == b.dense.bias.tobytes()
    )
