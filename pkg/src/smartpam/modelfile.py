"""Two-part model file: a one-line JSON manifest followed by a raw float32 blob.

Layout::

    SMARTPAM-MODEL\\n
    {manifest JSON, sorted keys, single line}\\n
    blob

The blob holds little-endian float32 values: for each conv layer the weights
in ``[out][in][tap]`` order then the bias, then the dense weights
``[out][in]`` and bias. The manifest records the blob length and its CRC-32.
"""

from __future__ import annotations

import json
import os
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptModel, InvalidModel, MalformedModel, UnsupportedVersion
from .nn import ConvLayerSpec, DenseSpec, ModelSpec, param_count

MAGIC = b"SMARTPAM-MODEL\n"
FORMAT_VERSION = 1
_LE_F32 = np.dtype("<f4")


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def model_blob(model: ModelSpec) -> bytes:
    parts = []
    for layer in model.conv_layers:
        parts += [layer.weights.ravel(), layer.bias]
    parts += [model.dense.weights.ravel(), model.dense.bias]
    return np.concatenate(parts).astype(_LE_F32).tobytes()


def manifest(model: ModelSpec, blob: bytes) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "window_samples": model.window_samples,
        "sample_rate_hz": model.sample_rate_hz,
        "class_labels": list(model.class_labels),
        "conv_layers": [
            {
                "in_channels": l.in_channels,
                "out_channels": l.out_channels,
                "kernel": l.kernel,
                "stride": l.stride,
                "dilation": l.dilation,
                "activation": l.activation.value,
            }
            for l in model.conv_layers
        ],
        "dense": {"in_features": model.dense.in_features, "out_features": model.dense.out_features},
        "blob_bytes": len(blob),
        "crc32": zlib.crc32(blob),
    }


def dumps_model(model: ModelSpec) -> bytes:
    blob = model_blob(model)
    header = json.dumps(manifest(model, blob), sort_keys=True, separators=(",", ":"))
    return MAGIC + header.encode("ascii") + b"\n" + blob


def save_model(model: ModelSpec, path) -> None:
    atomic_write(path, dumps_model(model))


def loads_model(data: bytes) -> ModelSpec:
    if not data.startswith(MAGIC):
        raise MalformedModel("malformed model: missing SMARTPAM-MODEL header")
    end = data.find(b"\n", len(MAGIC))
    if end < 0:
        raise MalformedModel("malformed model: unterminated manifest")
    try:
        meta = json.loads(data[len(MAGIC):end].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedModel(f"malformed model: unreadable manifest ({exc})") from None
    if not isinstance(meta, dict):
        raise MalformedModel("malformed model: manifest is not an object")
    if meta.get("format_version") != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported version: {meta.get('format_version')!r} (reader supports {FORMAT_VERSION})")
    blob = data[end + 1:]
    try:
        declared = int(meta["blob_bytes"])
        crc = int(meta["crc32"])
        layer_meta = list(meta["conv_layers"])
        dense_meta = meta["dense"]
        shapes = [(int(l["out_channels"]), int(l["in_channels"]), int(l["kernel"])) for l in layer_meta]
        dense_shape = (int(dense_meta["out_features"]), int(dense_meta["in_features"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedModel(f"malformed model: bad manifest field ({exc})") from None
    expected = 4 * (sum(o * i * k + o for o, i, k in shapes) + dense_shape[0] * dense_shape[1] + dense_shape[0])
    if declared != expected or len(blob) != declared:
        raise MalformedModel(
            f"malformed model: architecture needs {expected} blob bytes, manifest declares {declared}, file has {len(blob)}"
        )
    if zlib.crc32(blob) != crc:
        raise CorruptModel("corrupt model: blob checksum mismatch")

    values = np.frombuffer(blob, dtype=_LE_F32).astype(np.float32)
    pos = 0

    def take(n):
        nonlocal pos
        chunk = values[pos:pos + n]
        pos += n
        return chunk

    try:
        layers = []
        for l, (o, i, k) in zip(layer_meta, shapes):
            w = take(o * i * k).reshape(o, i, k)
            layers.append(ConvLayerSpec(i, o, k, int(l["stride"]), int(l["dilation"]), w, take(o), l["activation"]))
        dw = take(dense_shape[0] * dense_shape[1]).reshape(dense_shape)
        dense = DenseSpec(dense_shape[1], dense_shape[0], dw, take(dense_shape[0]))
        model = ModelSpec(
            layers,
            dense,
            window_samples=int(meta["window_samples"]),
            class_labels=tuple(meta["class_labels"]),
            sample_rate_hz=int(meta["sample_rate_hz"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidModel):
            raise MalformedModel(f"malformed model: {exc}") from None
        raise MalformedModel(f"malformed model: bad manifest field ({exc})") from None
    assert 4 * param_count(model).total == len(blob)
    return model


def load_model(path) -> ModelSpec:
    return loads_model(Path(path).read_bytes())
