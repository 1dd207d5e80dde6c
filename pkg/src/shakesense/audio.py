"""Waveform container, RIFF/WAV I/O and basic signal operations.

All operations are pure: they return new :class:`AudioClip` objects and never
mutate their inputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from shakesense.errors import (
    ChannelMismatch,
    IoFailure,
    MalformedWav,
    RateMismatch,
    SilentClip,
    UnsupportedEncoding,
)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

CHANNEL_POLICIES = ("mix", "left", "right")


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Sampled waveform.

    ``samples`` has shape ``(channels, n_samples)``; a 1-D array is promoted to
    a single channel.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        data = np.asarray(self.samples, dtype=np.float64)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got {data.ndim}-D")
        if data.shape[0] not in (1, 2):
            raise ChannelMismatch(f"expected 1 or 2 channels, got {data.shape[0]}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        data.setflags(write=False)
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def peak(self) -> float:
        if self.n_samples == 0:
            return 0.0
        return float(np.max(np.abs(self.samples)))

    def mono(self) -> np.ndarray:
        """Return the single channel of a mono clip as a 1-D array."""
        if self.channels != 1:
            raise ChannelMismatch("clip is not mono; downmix it first")
        return self.samples[0]

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    __hash__ = None


def _read_chunks(raw: bytes):
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWav("missing RIFF/WAVE header")
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack("<I", raw[pos + 4 : pos + 8])
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MalformedWav(f"chunk {chunk_id!r} truncated")
        yield chunk_id, body
        pos += 8 + size + (size & 1)


def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM or 32-bit float WAV file with one or two channels."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc

    fmt = None
    data = None
    for chunk_id, body in _read_chunks(raw):
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedWav("fmt chunk too short")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 26:
                    raise MalformedWav("extensible fmt chunk too short")
                (sub_tag,) = struct.unpack("<H", body[24:26])
                fmt = (sub_tag,) + fmt[1:]
        elif chunk_id == b"data":
            data = body
    if fmt is None:
        raise MalformedWav("no fmt chunk")
    if data is None:
        raise MalformedWav("no data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedEncoding(f"format tag {tag:#06x} with {bits} bits")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels")
    if rate == 0 or block_align != channels * dtype.itemsize:
        raise MalformedWav("inconsistent fmt chunk")
    n_frames = len(data) // block_align
    frames = np.frombuffer(data[: n_frames * block_align], dtype=dtype)
    samples = frames.reshape(n_frames, channels).T.astype(np.float64) / scale
    return AudioClip(samples, rate)


def save_wav(clip: AudioClip, path) -> None:
    """Write ``clip`` as 16-bit PCM; amplitudes outside [-1, 1] are clipped."""
    codes = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    payload = codes.T.tobytes()
    channels = clip.channels
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        WAVE_FORMAT_PCM,
        channels,
        clip.sample_rate,
        clip.sample_rate * channels * 2,
        channels * 2,
        16,
        b"data",
        len(payload),
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def normalize_peak(clip: AudioClip) -> AudioClip:
    """Scale so that the largest absolute sample over all channels is 1 (0 dBFS)."""
    peak = clip.peak
    if peak == 0.0:
        raise SilentClip("cannot peak-normalize a silent clip")
    if peak == 1.0:
        return clip
    return AudioClip(clip.samples * (1.0 / peak), clip.sample_rate)


def conform(clip: AudioClip, target_ms: float = 625, required_rate: int = 48000) -> AudioClip:
    """Truncate or zero-pad at the end to exactly ``target_ms`` milliseconds."""
    if clip.sample_rate != required_rate:
        raise RateMismatch(f"clip rate {clip.sample_rate} Hz, required {required_rate} Hz")
    target = int(round(target_ms / 1000.0 * required_rate))
    n = clip.n_samples
    if n == target:
        return clip
    if n > target:
        return AudioClip(clip.samples[:, :target], clip.sample_rate)
    padded = np.zeros((clip.channels, target))
    padded[:, :n] = clip.samples
    return AudioClip(padded, clip.sample_rate)


def downmix(clip: AudioClip, policy: str = "mix") -> AudioClip:
    if policy not in CHANNEL_POLICIES:
        raise ValueError(f"unknown channel policy {policy!r}; expected one of {CHANNEL_POLICIES}")
    if clip.channels == 1:
        return clip
    if policy == "mix":
        mono = 0.5 * (clip.samples[0] + clip.samples[1])
    elif policy == "left":
        mono = clip.samples[0]
    else:
        mono = clip.samples[1]
    return AudioClip(mono, clip.sample_rate)


@dataclass(frozen=True)
class GainMix:
    """Complementary signal/noise gains; the two always sum to one."""

    noise_gain: float

    def __post_init__(self):
        if not 0.0 <= self.noise_gain <= 1.0:
            raise ValueError("noise_gain must lie in [0, 1]")

    @property
    def signal_gain(self) -> float:
        return 1.0 - self.noise_gain


def _match_length(noise: np.ndarray, n: int) -> np.ndarray:
    if noise.shape[1] >= n:
        return noise[:, :n]
    reps = -(-n // noise.shape[1])
    return np.tile(noise, (1, reps))[:, :n]


def mix_noise(signal: AudioClip, noise: AudioClip, noise_gain: float) -> AudioClip:
    """Overlay ``noise`` on ``signal``: ``(1 - g) * signal + g * noise``.

    Both inputs are expected to be peak-normalized.  The noise is truncated
    (or tiled, if shorter) to the signal length.
    """
    gains = GainMix(float(noise_gain))
    if signal.sample_rate != noise.sample_rate:
        raise RateMismatch(f"signal {signal.sample_rate} Hz vs noise {noise.sample_rate} Hz")
    if signal.channels != noise.channels:
        raise ChannelMismatch(f"signal has {signal.channels} channels, noise {noise.channels}")
    if gains.noise_gain == 0.0:
        return signal
    matched = _match_length(noise.samples, signal.n_samples)
    if gains.noise_gain == 1.0:
        return AudioClip(matched, signal.sample_rate)
    mixed = gains.signal_gain * signal.samples + gains.noise_gain * matched
    return AudioClip(mixed, signal.sample_rate)
