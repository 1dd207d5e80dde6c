"""Mel Frequency Cepstral Coefficients.

Pipeline per frame: window -> zero-pad to ``fft_size`` -> ``|FFT|**2`` ->
triangular mel filterbank -> ``log(energy + log_floor)`` -> orthonormal
DCT-II -> first ``n_coeffs`` coefficients (coefficient 0 included, no
pre-emphasis, no liftering).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.signal
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from shakesense.audio import AudioClip, downmix, normalize_peak
from shakesense.errors import (
    ClipTooShort,
    ConfigDigestMismatch,
    NegativeFrequency,
    RateMismatch,
    TooManyFilters,
)

WINDOW_FUNCTIONS = ("hamming", "hann", "rectangular")
CACHE_FORMAT_VERSION = 1


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise NegativeFrequency(f"negative frequency {f}")
    out = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(out) if out.ndim == 0 else out


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise NegativeFrequency(f"negative mel value {m}")
    out = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MfccConfig:
    window_ms: float = 30.0
    step_ms: float = 15.0
    n_coeffs: int = 21
    n_mel_filters: int = 40
    fft_size: int | None = None
    log_floor: float = 1e-10
    window_function: str = "hamming"
    fmin: float = 0.0
    fmax: float | None = None

    def __post_init__(self):
        if not 0 < self.step_ms <= self.window_ms:
            raise ValueError("need 0 < step_ms <= window_ms")
        if not 1 <= self.n_coeffs <= self.n_mel_filters:
            raise ValueError("need 1 <= n_coeffs <= n_mel_filters")
        if self.window_function not in WINDOW_FUNCTIONS:
            raise ValueError(f"window_function must be one of {WINDOW_FUNCTIONS}")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")
        if self.fmin < 0 or (self.fmax is not None and self.fmax <= self.fmin):
            raise ValueError("need 0 <= fmin < fmax")

    def window_samples(self, rate: int) -> int:
        return int(round(self.window_ms / 1000.0 * rate))

    def step_samples(self, rate: int) -> int:
        return int(round(self.step_ms / 1000.0 * rate))

    def resolved_fft_size(self, rate: int) -> int:
        if self.fft_size is not None:
            return int(self.fft_size)
        n = self.window_samples(rate)
        return 1 << max(0, (n - 1).bit_length())

    def resolved_fmax(self, rate: int) -> float:
        return rate / 2.0 if self.fmax is None else float(self.fmax)

    def digest(self, rate: int) -> str:
        """Short hash identifying features computed with this config at ``rate``."""
        payload = json.dumps({"rate": int(rate), **asdict(self)}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MfccSequence:
    frames: np.ndarray  # (n_frames, n_coeffs)
    frame_times: np.ndarray  # start offsets in seconds

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def mel_band_edges(n_filters: int, fmin: float, fmax: float) -> np.ndarray:
    """Return ``n_filters + 2`` frequencies (Hz) equally spaced in mel."""
    mels = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2)
    return mel_to_hz(mels)


def build_mel_filterbank(config: MfccConfig, rate: int) -> np.ndarray:
    """Triangular filters of shape ``(n_mel_filters, fft_size // 2 + 1)``.

    Filter ``m`` rises linearly from edge ``m`` to its peak at edge ``m + 1``
    and falls back to zero at edge ``m + 2``, so neighbours overlap at the
    triangle feet.
    """
    fmax = config.resolved_fmax(rate)
    if fmax > rate / 2.0:
        raise ValueError(f"fmax {fmax} exceeds Nyquist {rate / 2}")
    n_fft = config.resolved_fft_size(rate)
    bin_freqs = np.arange(n_fft // 2 + 1) * rate / n_fft
    edges = mel_band_edges(config.n_mel_filters, config.fmin, fmax)

    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_freqs - lower) / (center - lower)
    falling = (upper - bin_freqs) / (upper - center)
    bank = np.maximum(0.0, np.minimum(rising, falling))

    empty = np.flatnonzero(~np.any(bank > 0, axis=1))
    if empty.size:
        raise TooManyFilters(
            f"{config.n_mel_filters} filters leave filters {empty.tolist()} without "
            f"any FFT bin (fft_size={n_fft}, rate={rate})"
        )
    return bank


def _window(name: str, n: int) -> np.ndarray:
    if name == "rectangular":
        return np.ones(n)
    return scipy.signal.get_window(name, n, fftbins=True)


def frame_signal(x: np.ndarray, window: int, step: int) -> np.ndarray:
    """Overlapping frames of shape ``(n_frames, window)`` (read-only view)."""
    if x.shape[-1] < window:
        raise ClipTooShort(f"{x.shape[-1]} samples is shorter than one {window}-sample window")
    frames = np.lib.stride_tricks.sliding_window_view(x, window)
    return frames[::step]


def power_spectrum(frames: np.ndarray, n_fft: int) -> np.ndarray:
    """``|rfft(frame, n_fft)|**2`` for each row of ``frames``."""
    spec = np.fft.rfft(frames, n=n_fft, axis=-1)
    return spec.real**2 + spec.imag**2


def dct_ortho(x: np.ndarray) -> np.ndarray:
    return scipy.fft.dct(x, type=2, norm="ortho", axis=-1)


def idct_ortho(x: np.ndarray) -> np.ndarray:
    return scipy.fft.idct(x, type=2, norm="ortho", axis=-1)


def log_mel_energies(
    samples: np.ndarray, rate: int, config: MfccConfig, filterbank: np.ndarray | None = None
) -> np.ndarray:
    """Log filterbank energies, shape ``(n_frames, n_mel_filters)``."""
    if filterbank is None:
        filterbank = build_mel_filterbank(config, rate)
    win = config.window_samples(rate)
    frames = frame_signal(samples, win, config.step_samples(rate))
    power = power_spectrum(frames * _window(config.window_function, win), config.resolved_fft_size(rate))
    return np.log(power @ filterbank.T + config.log_floor)


def compute_mfcc(
    clip: AudioClip, config: MfccConfig = MfccConfig(), filterbank: np.ndarray | None = None
) -> MfccSequence:
    """MFCC sequence of a mono clip.

    ``filterbank`` may be passed to reuse a matrix from
    :func:`build_mel_filterbank` across many clips.
    """
    samples = clip.mono()
    log_e = log_mel_energies(samples, clip.sample_rate, config, filterbank)
    coeffs = dct_ortho(log_e)[:, : config.n_coeffs]
    step = config.step_samples(clip.sample_rate)
    times = np.arange(coeffs.shape[0]) * step / clip.sample_rate
    return MfccSequence(frames=coeffs, frame_times=times)


def n_frames_for(n_samples: int, rate: int, config: MfccConfig) -> int:
    win, step = config.window_samples(rate), config.step_samples(rate)
    if n_samples < win:
        return 0
    return (n_samples - win) // step + 1


class MfccTransformer(TransformerMixin, BaseEstimator):
    """Turn audio clips into MFCC sequences.

    Parameters mirror :class:`MfccConfig`, plus:

    channels : {"mix", "left", "right", "stack"}
        How stereo input is reduced. ``"stack"`` computes MFCCs per channel and
        concatenates them per frame (feature width ``2 * n_coeffs``).
    normalize : bool
        Peak-normalize each clip to 0 dBFS before analysis.
    sample_rate : int
        Rate assumed for raw array input; ``AudioClip`` input must match it.

    ``transform`` accepts a sequence of ``AudioClip`` or 1-D arrays and returns
    an array ``(n_clips, n_frames, width)`` when all clips yield the same
    number of frames, otherwise a list of 2-D arrays.
    """

    def __init__(
        self,
        n_coeffs=21,
        window_ms=30.0,
        step_ms=15.0,
        n_mel_filters=40,
        fft_size=None,
        window_function="hamming",
        log_floor=1e-10,
        fmin=0.0,
        fmax=None,
        channels="mix",
        normalize=True,
        sample_rate=48000,
    ):
        self.n_coeffs = n_coeffs
        self.window_ms = window_ms
        self.step_ms = step_ms
        self.n_mel_filters = n_mel_filters
        self.fft_size = fft_size
        self.window_function = window_function
        self.log_floor = log_floor
        self.fmin = fmin
        self.fmax = fmax
        self.channels = channels
        self.normalize = normalize
        self.sample_rate = sample_rate

    def _make_config(self) -> MfccConfig:
        return MfccConfig(
            window_ms=self.window_ms,
            step_ms=self.step_ms,
            n_coeffs=self.n_coeffs,
            n_mel_filters=self.n_mel_filters,
            fft_size=self.fft_size,
            log_floor=self.log_floor,
            window_function=self.window_function,
            fmin=self.fmin,
            fmax=self.fmax,
        )

    def fit(self, X=None, y=None):
        if self.channels not in ("mix", "left", "right", "stack"):
            raise ValueError(f"unknown channel policy {self.channels!r}")
        self.config_ = self._make_config()
        self.filterbank_ = build_mel_filterbank(self.config_, self.sample_rate)
        self.digest_ = self.config_.digest(self.sample_rate)
        if self.channels != "mix":
            self.digest_ = f"{self.digest_}-{self.channels}"
        self.n_features_out_ = self.n_coeffs * (2 if self.channels == "stack" else 1)
        return self

    def _as_clip(self, item) -> AudioClip:
        if isinstance(item, AudioClip):
            if item.sample_rate != self.sample_rate:
                raise RateMismatch(f"clip rate {item.sample_rate}, transformer expects {self.sample_rate}")
            return item
        return AudioClip(np.asarray(item, dtype=np.float64), self.sample_rate)

    def transform_one(self, item) -> np.ndarray:
        check_is_fitted(self, "filterbank_")
        clip = self._as_clip(item)
        if self.normalize:
            clip = normalize_peak(clip)
        if self.channels == "stack" and clip.channels == 2:
            parts = [
                compute_mfcc(AudioClip(ch, clip.sample_rate), self.config_, self.filterbank_).frames
                for ch in clip.samples
            ]
            return np.concatenate(parts, axis=1)
        if self.channels == "stack":
            mono = compute_mfcc(clip, self.config_, self.filterbank_).frames
            return np.concatenate([mono, mono], axis=1)
        mono_clip = downmix(clip, self.channels)
        return compute_mfcc(mono_clip, self.config_, self.filterbank_).frames

    def transform(self, X):
        feats = [self.transform_one(item) for item in X]
        if feats and all(f.shape == feats[0].shape for f in feats):
            return np.stack(feats)
        return feats

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "n_features_out_")
        return np.array([f"mfcc{i}" for i in range(self.n_features_out_)], dtype=object)


def with_coeffs(config: MfccConfig, n_coeffs: int) -> MfccConfig:
    return replace(config, n_coeffs=n_coeffs)


def save_feature_cache(path, features: np.ndarray, ids, digest: str) -> None:
    """Write an ``.npz`` feature cache.

    Layout: ``features`` float64 ``(n_clips, n_frames, n_coeffs)``, ``ids``
    (clip identifiers, unicode), ``header`` int64 ``[version, n_frames,
    n_coeffs]`` and ``digest`` (config digest string).
    """
    features = np.asarray(features, dtype=np.float64)
    header = np.array([CACHE_FORMAT_VERSION, features.shape[1], features.shape[2]], dtype=np.int64)
    with open(path, "wb") as fh:
        np.savez(fh, features=features, ids=np.asarray(ids, dtype=str), header=header, digest=np.str_(digest))


def load_feature_cache(path, expected_digest: str | None = None):
    """Return ``(features, ids)`` from a cache written by :func:`save_feature_cache`."""
    with np.load(Path(path), allow_pickle=False) as npz:
        digest = str(npz["digest"])
        header = npz["header"]
        features = npz["features"]
        ids = npz["ids"].tolist()
    if expected_digest is not None and digest != expected_digest:
        raise ConfigDigestMismatch(f"cache digest {digest} != expected {expected_digest}")
    if header[0] != CACHE_FORMAT_VERSION or features.shape[1:] != tuple(header[1:]):
        raise ConfigDigestMismatch("feature cache header does not match its contents")
    return features, ids
