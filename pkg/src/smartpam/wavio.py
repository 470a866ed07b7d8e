"""Strict reader/writer for mono 16-bit PCM RIFF/WAVE files.

Anything outside that subset is rejected with :class:`WavError`; malformed
input never escapes as another exception type.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import WavError
from .modelfile import atomic_write
from .stream import AudioStream

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
# KSDATAFORMAT_SUBTYPE_PCM
_PCM_SUBFORMAT = bytes.fromhex("0100000000001000800000aa00389b71")


@dataclass
class WavClip:
    stream: AudioStream
    sample_rate_hz: int
    bits_per_sample: int
    channels: int

    @property
    def samples(self) -> np.ndarray:
        return self.stream.samples


def _chunks(data: bytes, end: int):
    pos = 12
    while pos + 8 <= end:
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = pos + 8
        yield cid, body, size
        pos = body + size + (size & 1)


def parse_wav(data: bytes) -> WavClip:
    if len(data) < 12:
        raise WavError(f"not a WAV file: {len(data)} bytes is shorter than a RIFF header")
    riff, riff_size, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise WavError("not a RIFF/WAVE file")
    end = 8 + riff_size
    if end > len(data):
        raise WavError(f"truncated file: RIFF header declares {end} bytes, file has {len(data)}")
    fmt = None
    pcm = None
    for cid, body, size in _chunks(data, end):
        if cid == b"fmt ":
            if fmt is not None:
                raise WavError("duplicate fmt chunk")
            if size < 16 or body + size > end:
                raise WavError(f"fmt chunk too short or truncated ({size} bytes declared)")
            fmt = struct.unpack_from("<HHIIHH", data, body)
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if size < 40 or data[body + 24:body + 40] != _PCM_SUBFORMAT:
                    raise WavError("PCM required: extensible format without a PCM subformat")
        elif cid == b"data":
            if fmt is None:
                raise WavError("data chunk precedes fmt chunk")
            available = end - body
            if size > available:
                raise WavError(f"truncated data chunk: header declares {size} bytes, only {max(available, 0)} present")
            pcm = data[body:body + size]
            break
    if fmt is None:
        raise WavError("missing fmt chunk")
    tag, channels, rate, byte_rate, block_align, bits = fmt
    if tag not in (WAVE_FORMAT_PCM, WAVE_FORMAT_EXTENSIBLE):
        raise WavError(f"PCM required: format tag 0x{tag:04x} is not integer PCM")
    if channels != 1:
        raise WavError(f"mono required: file has {channels} channels")
    if bits != 16:
        raise WavError(f"16-bit samples required: file has {bits}-bit samples")
    if rate == 0:
        raise WavError("sample rate of 0 Hz")
    if block_align != 2 or byte_rate != rate * 2:
        raise WavError(f"inconsistent header: block_align={block_align}, byte_rate={byte_rate} for {rate} Hz mono 16-bit")
    if pcm is None:
        raise WavError("missing data chunk")
    if len(pcm) % 2:
        raise WavError(f"data chunk holds {len(pcm)} bytes, not a whole number of 16-bit samples")
    samples = np.frombuffer(pcm, dtype="<i2").astype(np.int16)
    return WavClip(AudioStream(samples, rate), rate, bits, channels)


def read_wav(path) -> WavClip:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise WavError(f"cannot read {path}: {exc.strerror}") from None
    return parse_wav(data)


def wav_bytes(samples, sample_rate_hz: int = 24000) -> bytes:
    pcm = np.asarray(samples, dtype="<i2").tobytes()
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, 1, sample_rate_hz, sample_rate_hz * 2, 2, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(pcm)) + pcm
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(path, samples, sample_rate_hz: int = 24000) -> None:
    atomic_write(path, wav_bytes(samples, sample_rate_hz))
