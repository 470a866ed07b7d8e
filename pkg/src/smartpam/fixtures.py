"""Architecture builders, seeded weights and a hand-crafted tone detector.

The crafted detector turns the first conv layer into a three-band filter bank
(low-pass, band-pass, high-pass taps), rectifies, smooths with averaging
kernels through the remaining layers and lets the dense head compare mean
band energies. Pure tones at 1/8, 2/8 and 3/8 of the first layer's
dilated Nyquist band then classify as male, chick and female; an all-zero
window (which standardizes to zeros) classifies as noise.
"""

from __future__ import annotations

import numpy as np

from .nn import (
    DEFAULT_CLASS_LABELS,
    DEFAULT_SAMPLE_RATE_HZ,
    DTYPE,
    Activation,
    ConvLayerSpec,
    DenseSpec,
    ModelSpec,
    layer_lengths,
)

ARCHITECTURES = {
    "small": dict(n_layers=6, filters=4, kernel=3, dilation=3, stride=3, stride_every=2, window_samples=1024),
    "large": dict(n_layers=12, filters=16, kernel=3, dilation=5, stride=3, stride_every=3, window_samples=9000),
}
WEIGHT_MODES = ("random", "zero", "detector")
TONE_HARMONIC = {"male": 1, "chick": 2, "female": 3}


def stride_schedule(n_layers: int, stride: int, every: int, position: str = "last") -> list[int]:
    """Strides per layer for "stride every N layers".

    ``position="last"`` puts the stride on layers N, 2N, ... (1-based);
    ``"first"`` on layers 1, N+1, ...
    """
    if position not in ("first", "last"):
        raise ValueError("position must be 'first' or 'last'")
    offset = every - 1 if position == "last" else 0
    return [stride if i % every == offset else 1 for i in range(n_layers)]


def build_model(
    n_layers: int,
    filters: int,
    kernel: int,
    dilation: int,
    stride: int,
    stride_every: int,
    window_samples: int,
    stride_position: str = "last",
    class_labels=DEFAULT_CLASS_LABELS,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ,
) -> ModelSpec:
    """Zero-weight model with the requested geometry."""
    strides = stride_schedule(n_layers, stride, stride_every, stride_position)
    layers = []
    channels = 1
    for s in strides:
        layers.append(ConvLayerSpec(channels, filters, kernel, s, dilation))
        channels = filters
    final = layer_lengths(window_samples, layers)[-1]
    dense = DenseSpec(final * channels, len(class_labels))
    return ModelSpec(layers, dense, window_samples, tuple(class_labels), sample_rate_hz)


def architecture(arch: str | dict) -> ModelSpec:
    params = ARCHITECTURES[arch] if isinstance(arch, str) else arch
    return build_model(**params)


def randomize(model: ModelSpec, seed: int, low: float = -0.5, high: float = 0.5) -> ModelSpec:
    """Fill every parameter from ``uniform(low, high)`` in blob order."""
    rng = np.random.default_rng(seed)

    def draw(shape):
        return rng.uniform(low, high, size=shape).astype(DTYPE)

    for layer in model.conv_layers:
        layer.weights = draw(layer.weights.shape)
        layer.bias = draw(layer.bias.shape)
    model.dense.weights = draw(model.dense.weights.shape)
    model.dense.bias = draw(model.dense.bias.shape)
    return model


def detector_tone_hz(model: ModelSpec, label: str) -> float:
    d = model.conv_layers[0].dilation
    return TONE_HARMONIC[label] * model.sample_rate_hz / (8.0 * d)


def craft_detector(model: ModelSpec) -> ModelSpec:
    first = model.conv_layers[0] if model.conv_layers else None
    if first is None or first.kernel < 3 or first.out_channels < 3:
        raise ValueError("crafted detector needs a first conv layer with kernel >= 3 and >= 3 filters")
    for label in ("male", "female", "chick", "noise"):
        if label not in model.class_labels:
            raise ValueError(f"crafted detector needs class label {label!r}")
    for layer in model.conv_layers[1:]:
        if layer.in_channels != layer.out_channels:
            raise ValueError("crafted detector needs constant channel width after the first layer")

    w = np.zeros_like(first.weights)
    w[0, 0, :3] = [0.25, 0.5, 0.25]    # low band
    w[1, 0, :3] = [0.25, -0.5, 0.25]   # high band
    w[2, 0, :3] = [0.5, 0.0, -0.5]     # mid band
    first.weights = w
    first.bias = np.zeros_like(first.bias)
    first.activation = Activation.RELU
    for layer in model.conv_layers[1:]:
        w = np.zeros_like(layer.weights)
        for c in range(layer.out_channels):
            w[c, c, :] = 1.0 / layer.kernel
        layer.weights = w
        layer.bias = np.zeros_like(layer.bias)
        layer.activation = Activation.RELU

    n = model.final_length
    channels = model.final_channels
    mean = np.zeros((channels, channels * n), dtype=np.float64)
    for c in range(channels):
        mean[c, c * n:(c + 1) * n] = 1.0 / n
    low, high, mid = mean[0], mean[1], mean[2]
    idx = {label: model.class_labels.index(label) for label in ("male", "female", "chick", "noise")}
    dw = np.zeros((len(model.class_labels), channels * n))
    db = np.zeros(len(model.class_labels))
    # a rectified unit sine through the bank gives low + high == sqrt(2)/pi for any tone
    dw[idx["male"]] = 20.0 * (low - high)
    dw[idx["female"]] = 20.0 * (high - low)
    dw[idx["chick"]] = 40.0 * mid - 34.0 * (low + high)
    dw[idx["noise"]] = -10.0 * (low + high)
    db[idx["noise"]] = 1.0
    model.dense.weights = dw.astype(DTYPE)
    model.dense.bias = db.astype(DTYPE)
    return model


def gen_fixture(arch: str | dict = "small", seed: int = 0, weight_mode: str = "random") -> ModelSpec:
    model = architecture(arch)
    if weight_mode == "random":
        return randomize(model, seed)
    if weight_mode == "zero":
        return model
    if weight_mode == "detector":
        return craft_detector(model)
    raise ValueError(f"unknown weight mode {weight_mode!r}; expected one of {', '.join(WEIGHT_MODES)}")


def tone(freq_hz: float, n_samples: int, sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ,
         amplitude: int = 8000, phase: float = 0.0) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate_hz
    return np.round(amplitude * np.sin(2 * np.pi * freq_hz * t + phase)).astype(np.int16)


def pattern_stream(model: ModelSpec, labels, amplitude: int = 8000) -> np.ndarray:
    """One window per entry of ``labels``; "noise" windows are silent, others carry the class tone."""
    w = model.window_samples
    parts = []
    for k, label in enumerate(labels):
        if label == "noise":
            parts.append(np.zeros(w, dtype=np.int16))
        else:
            parts.append(tone(detector_tone_hz(model, label), w, model.sample_rate_hz, amplitude, phase=0.7 * k))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int16)


def demo_samples(model: ModelSpec, silence_s: float = 2.0, tone_s: float = 2.0, label: str = "male",
                 amplitude: int = 8000) -> np.ndarray:
    """Silence, a class tone, silence: the triggered-recording demo signal."""
    rate = model.sample_rate_hz
    quiet = np.zeros(int(silence_s * rate), dtype=np.int16)
    call = tone(detector_tone_hz(model, label), int(tone_s * rate), rate, amplitude)
    return np.concatenate([quiet, call, quiet])
