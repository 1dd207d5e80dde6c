"""Synthetic capsule-shake recordings.

Each clip holds one or two deceleration bursts (the up and down ends of a
roughly 1 Hz whipping motion).  A burst is ``round(fill_mass / grain_mass)``
grain impacts with jittered onsets; every impact is exponentially decaying
white noise passed through a second-order resonator tuned to the material.
A low background floor (white noise plus optional servo hum) is added before
peak normalization.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal

from shakesense.audio import AudioClip, load_wav, normalize_peak, save_wav
from shakesense.errors import InvalidSpec, IoFailure

MATERIALS = ("coins", "glass", "gravel", "herbs", "nuts", "plastic", "rice", "sand", "stone", "sugar")
PROCEDURES = ("A", "B")
DEFAULT_RATE = 48000
DEFAULT_DURATION_MS = 625

# fill masses in grams, three capsules per material
TABLE_WEIGHTS = {
    "coins": (20.7, 39.1, 61.8),
    "glass": (6.3, 12.6, 18.9),
    "gravel": (10.4, 20.4, 29.9),
    "herbs": (1.0, 2.0, 3.0),
    "nuts": (9.9, 20.1, 30.1),
    "plastic": (1.7, 3.4, 5.2),
    "rice": (4.5, 9.0, 13.5),
    "sand": (8.0, 16.0, 24.1),
    "stone": (4.5, 7.3, 10.8),
    "sugar": (4.0, 8.0, 12.0),
}


@dataclass(frozen=True)
class MaterialProfile:
    name: str
    grain_mass: float  # grams per grain
    impact_center_freq: float  # Hz
    impact_bandwidth: float  # Hz
    decay_ms: float
    amplitude_per_gram: float
    spread_ms: float = 30.0  # std of impact onsets around the burst time

    def __post_init__(self):
        if self.grain_mass <= 0:
            raise InvalidSpec(f"{self.name}: grain_mass must be positive")
        if not 20.0 <= self.impact_center_freq <= 20000.0:
            raise InvalidSpec(f"{self.name}: impact_center_freq outside [20, 20000] Hz")
        if self.impact_bandwidth <= 0 or self.decay_ms <= 0 or self.spread_ms <= 0:
            raise InvalidSpec(f"{self.name}: bandwidth, decay and spread must be positive")


# Heavy coarse materials ring low and long with few grains; fine materials hiss
# high and short with many grains.  Sand and sugar differ only slightly.
DEFAULT_PROFILES = {
    p.name: p
    for p in (
        MaterialProfile("coins", 2.3, 5200.0, 400.0, 30.0, 0.10, 25.0),
        MaterialProfile("glass", 0.35, 7200.0, 1500.0, 7.0, 0.50, 25.0),
        MaterialProfile("gravel", 0.6, 2400.0, 1600.0, 5.0, 0.35, 30.0),
        MaterialProfile("herbs", 0.02, 9000.0, 7000.0, 1.5, 3.0, 45.0),
        MaterialProfile("nuts", 1.1, 1200.0, 700.0, 9.0, 0.20, 30.0),
        MaterialProfile("plastic", 0.03, 3300.0, 900.0, 4.0, 3.0, 30.0),
        MaterialProfile("rice", 0.025, 4600.0, 2600.0, 2.5, 1.6, 35.0),
        MaterialProfile("sand", 0.02, 11000.0, 7000.0, 1.0, 1.2, 40.0),
        MaterialProfile("stone", 1.5, 1700.0, 500.0, 14.0, 0.30, 25.0),
        MaterialProfile("sugar", 0.02, 11600.0, 7000.0, 1.0, 1.2, 40.0),
    )
}


@dataclass(frozen=True)
class CapsuleSpec:
    material: MaterialProfile
    fill_mass: float
    procedure: str = "A"
    shake_freq: float = 1.0

    def __post_init__(self):
        if self.fill_mass <= 0:
            raise InvalidSpec("fill_mass must be positive")
        if self.procedure not in PROCEDURES:
            raise InvalidSpec(f"procedure must be one of {PROCEDURES}")
        if not 0.2 <= self.shake_freq <= 5.0:
            raise InvalidSpec("shake_freq should be around 1 Hz")

    @property
    def n_grains(self) -> int:
        return max(1, int(round(self.fill_mass / self.material.grain_mass)))


@dataclass(frozen=True)
class SynthOptions:
    noise_floor_dbfs: float = -40.0
    servo_hum: bool = True
    hum_freq: float = 95.0
    hum_dbfs: float = -38.0
    onset_jitter_ms: float = 20.0
    stereo: bool = False


def _resonator(center, bandwidth, rate):
    w0 = center / (rate / 2.0)
    q = max(center / bandwidth, 0.3)
    return scipy.signal.iirpeak(min(w0, 0.98), q)


def _burst_times(rng, duration_s, shake_freq, jitter_s):
    # one deceleration at each end of the whip: two per shake period
    half = 0.5 / shake_freq
    phase = rng.uniform(0.03, 0.12)
    times = np.arange(phase, duration_s - 0.05, half)
    return times + rng.uniform(-jitter_s, jitter_s, size=times.shape)


def _synth_impacts(rng, capsule: CapsuleSpec, n_samples: int, rate: int, jitter_s: float, duration_s: float):
    """Sum of resonant grain impacts, before the background floor."""
    mat = capsule.material
    centre, spread = mat.impact_center_freq, mat.spread_ms
    if capsule.procedure == "B":
        # wrist turned by 90 degrees: grains hit the side wall, brighter and tighter
        centre, spread = min(centre * 1.08, 20000.0), spread * 0.8
    excitation = np.zeros(n_samples)
    bursts = _burst_times(rng, duration_s, capsule.shake_freq, jitter_s)
    amp = mat.amplitude_per_gram * mat.grain_mass
    for k, t in enumerate(bursts):
        strength = 1.0 if k % 2 == 0 else 0.7
        onsets = t + np.abs(rng.normal(0.0, spread / 1000.0, size=capsule.n_grains))
        idx = np.round(onsets * rate).astype(int)
        keep = (idx >= 0) & (idx < n_samples)
        weights = amp * strength * rng.uniform(0.5, 1.0, size=capsule.n_grains)
        np.add.at(excitation, idx[keep], weights[keep])
    # decaying envelope for every onset at once: one-pole smoother of the impulse train
    pole = np.exp(-1.0 / (mat.decay_ms / 1000.0 * rate))
    envelope = scipy.signal.lfilter([1.0], [1.0, -pole], excitation)
    b, a = _resonator(centre, mat.impact_bandwidth, rate)
    return scipy.signal.lfilter(b, a, envelope * rng.standard_normal(n_samples))


def _background(rng, n_samples, rate, options: SynthOptions):
    floor = 10.0 ** (options.noise_floor_dbfs / 20.0) * rng.standard_normal(n_samples)
    if options.servo_hum:
        t = np.arange(n_samples) / rate
        hum_amp = 10.0 ** (options.hum_dbfs / 20.0)
        phase = rng.uniform(0, 2 * np.pi)
        for h, rel in ((1, 1.0), (2, 0.5), (3, 0.25)):
            floor += hum_amp * rel * np.sin(2 * np.pi * h * options.hum_freq * t + h * phase)
    return floor


def synth_shake_clip(
    capsule: CapsuleSpec,
    duration_ms: float = DEFAULT_DURATION_MS,
    rate: int = DEFAULT_RATE,
    seed=0,
    options: SynthOptions = SynthOptions(),
    normalize: bool = True,
) -> AudioClip:
    """Render one shake recording; bit-identical for identical arguments."""
    if duration_ms <= 0 or rate <= 0:
        raise InvalidSpec("duration and rate must be positive")
    rng = np.random.default_rng(seed)
    n = int(round(duration_ms / 1000.0 * rate))
    jitter = options.onset_jitter_ms / 1000.0
    signal = _synth_impacts(rng, capsule, n, rate, jitter, duration_ms / 1000.0)
    left = signal + _background(rng, n, rate, options)
    if options.stereo:
        # the far ear hears a slightly delayed, attenuated copy plus its own floor
        delay = int(rng.integers(5, 30))
        right = 0.85 * np.concatenate([np.zeros(delay), signal[: n - delay]]) + _background(rng, n, rate, options)
        clip = AudioClip(np.vstack([left, right]), rate)
    else:
        clip = AudioClip(left, rate)
    return normalize_peak(clip) if normalize else clip


def burst_rms(capsule: CapsuleSpec, duration_ms=DEFAULT_DURATION_MS, rate=DEFAULT_RATE, seed=0) -> float:
    """RMS of the impact component alone (no floor, no normalization)."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_ms / 1000.0 * rate))
    sig = _synth_impacts(rng, capsule, n, rate, SynthOptions().onset_jitter_ms / 1000.0, duration_ms / 1000.0)
    return float(np.sqrt(np.mean(sig**2)))


# -- synthetic background noises for robustness sweeps ------------------------


def _pink(rng, n):
    spectrum = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spectrum.size)
    f[0] = 1
    return np.fft.irfft(spectrum / np.sqrt(f), n)


def synth_noise(kind: str, duration_ms: float = 2000, rate: int = DEFAULT_RATE, seed=0) -> AudioClip:
    """Peak-normalized background noise: white, pink, babble, traffic, hum or clatter."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_ms / 1000.0 * rate))
    t = np.arange(n) / rate
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "pink":
        x = _pink(rng, n)
    elif kind == "babble":
        # several band-limited voices with syllable-rate amplitude modulation
        x = np.zeros(n)
        for _ in range(5):
            b, a = scipy.signal.butter(2, [rng.uniform(200, 500), rng.uniform(1500, 3500)], "bandpass", fs=rate)
            voice = scipy.signal.lfilter(b, a, rng.standard_normal(n))
            rate_hz = rng.uniform(3.0, 6.0)
            x += voice * (0.5 + 0.5 * np.sin(2 * np.pi * rate_hz * t + rng.uniform(0, 2 * np.pi))) ** 2
    elif kind == "traffic":
        b, a = scipy.signal.butter(2, 400, "lowpass", fs=rate)
        x = scipy.signal.lfilter(b, a, rng.standard_normal(n)) * (1.0 + 0.3 * np.sin(2 * np.pi * 0.7 * t))
    elif kind == "hum":
        x = sum(np.sin(2 * np.pi * 50.0 * h * t + rng.uniform(0, 2 * np.pi)) / h for h in range(1, 8))
        x = x + 0.05 * rng.standard_normal(n)
    elif kind == "clatter":
        clicks = (rng.random(n) < 40.0 / rate) * rng.uniform(0.3, 1.0, n)
        env = scipy.signal.lfilter([1.0], [1.0, -np.exp(-1.0 / (0.004 * rate))], clicks)
        x = env * rng.standard_normal(n) + 0.05 * _pink(rng, n)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return normalize_peak(AudioClip(x, rate))


NOISE_KINDS = ("white", "pink", "babble", "traffic", "hum", "clatter")


# -- corpus generation --------------------------------------------------------


@dataclass
class ManifestEntry:
    path: str
    material: str
    weight: float
    capsule_id: str
    procedure: str
    take: int


@dataclass
class DatasetManifest:
    """Index of a generated corpus.

    JSON layout::

        {"seed": int, "config_digest": str, "config": {...},
         "entries": [{"path", "material", "weight", "capsule_id",
                      "procedure", "take"}, ...]}

    Paths are relative to the manifest's directory.
    """

    entries: list
    seed: int
    config_digest: str
    config: dict = field(default_factory=dict)
    root: Path | None = None

    def __len__(self):
        return len(self.entries)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.material for e in self.entries])

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.entries], dtype=np.float64)

    @property
    def capsule_ids(self) -> list:
        return sorted({e.capsule_id for e in self.entries})

    def resolve(self, entry: ManifestEntry) -> Path:
        return (self.root or Path(".")) / entry.path

    def load_clip(self, index: int) -> AudioClip:
        return load_wav(self.resolve(self.entries[index]))

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "config_digest": self.config_digest,
            "config": self.config,
            "entries": [asdict(e) for e in self.entries],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_json())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        doc = json.loads(path.read_text())
        entries = [ManifestEntry(**e) for e in doc["entries"]]
        for e in entries:
            if e.material not in MATERIALS or e.weight <= 0:
                raise ValueError(f"invalid manifest entry {e}")
        return cls(entries, doc["seed"], doc["config_digest"], doc.get("config", {}), root=path.parent)


def clip_seed(master_seed: int, capsule_index: int, take: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(capsule_index), int(take)])


def _render_entry(args):
    capsule, seed, options, duration_ms, rate, path = args
    clip = synth_shake_clip(capsule, duration_ms, rate, seed, options)
    save_wav(clip, path)


def generate_dataset(
    out_dir,
    seed: int = 0,
    materials=MATERIALS,
    weights=None,
    takes_per_capsule: int = 36,
    profiles=None,
    options: SynthOptions = SynthOptions(),
    duration_ms: float = DEFAULT_DURATION_MS,
    rate: int = DEFAULT_RATE,
    jobs: int = 1,
) -> DatasetManifest:
    """Write ``len(materials) * 3 * takes_per_capsule`` WAV clips plus ``manifest.json``.

    Takes alternate between procedures A and B in equal halves (the first
    half of a capsule's takes uses A).
    """
    profiles = {**DEFAULT_PROFILES, **(profiles or {})}
    weights = {m: TABLE_WEIGHTS[m] for m in materials} if weights is None else dict(weights)
    out_dir = Path(out_dir)
    clip_dir = out_dir / "clips"
    try:
        clip_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc

    config = {
        "materials": list(materials),
        "weights": {m: list(weights[m]) for m in materials},
        "takes_per_capsule": takes_per_capsule,
        "profiles": {m: asdict(profiles[m]) for m in materials},
        "options": asdict(options),
        "duration_ms": duration_ms,
        "rate": rate,
    }
    digest = hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]

    entries, jobs_args = [], []
    capsule_index = 0
    for material in materials:
        for level, grams in enumerate(weights[material]):
            capsule_id = f"{material}-{level + 1}"
            for take in range(takes_per_capsule):
                procedure = "A" if take < (takes_per_capsule + 1) // 2 else "B"
                capsule = CapsuleSpec(profiles[material], float(grams), procedure)
                rel = f"clips/{capsule_id}_{take:02d}.wav"
                entries.append(ManifestEntry(rel, material, float(grams), capsule_id, procedure, take))
                jobs_args.append(
                    (capsule, clip_seed(seed, capsule_index, take), options, duration_ms, rate, out_dir / rel)
                )
            capsule_index += 1

    if jobs > 1:
        from joblib import Parallel, delayed

        Parallel(n_jobs=jobs)(delayed(_render_entry)(a) for a in jobs_args)
    else:
        for a in jobs_args:
            _render_entry(a)

    manifest = DatasetManifest(entries, int(seed), digest, config, root=out_dir)
    manifest.save(out_dir / "manifest.json")
    return manifest

