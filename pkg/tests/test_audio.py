import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shakesense.audio import (
    AudioClip,
    GainMix,
    conform,
    downmix,
    load_wav,
    mix_noise,
    normalize_peak,
    save_wav,
)
from shakesense.errors import (
    ChannelMismatch,
    MalformedWav,
    RateMismatch,
    SilentClip,
    UnsupportedEncoding,
)


def _write_raw_wav(path, payload, *, tag=1, channels=1, rate=48000, bits=16):
    block = channels * bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE", b"fmt ", 16, tag, channels,
        rate, rate * block, block, bits, b"data", len(payload),
    )
    path.write_bytes(header + payload)


def test_load_max_pcm_code(tmp_path):
    f = tmp_path / "one.wav"
    _write_raw_wav(f, struct.pack("<h", 32767))
    clip = load_wav(f)
    assert clip.sample_rate == 48000
    assert clip.n_samples == 1
    assert clip.samples[0, 0] == pytest.approx(0.99997, abs=1e-5)


def test_load_zero_code(tmp_path):
    f = tmp_path / "zero.wav"
    _write_raw_wav(f, struct.pack("<h", 0))
    assert load_wav(f).samples[0, 0] == 0.0


def test_load_float32(tmp_path):
    f = tmp_path / "f.wav"
    values = np.array([0.25, -0.5, 1.0], dtype="<f4")
    _write_raw_wav(f, values.tobytes(), tag=3, bits=32)
    np.testing.assert_array_equal(load_wav(f).samples[0], values.astype(float))


def test_load_stereo_deinterleaves(tmp_path):
    f = tmp_path / "st.wav"
    _write_raw_wav(f, struct.pack("<4h", 100, -100, 200, -200), channels=2)
    clip = load_wav(f)
    np.testing.assert_array_equal(clip.samples * 32768, [[100, 200], [-100, -200]])


@pytest.mark.parametrize(
    "tag,bits,exc",
    [(1, 8, UnsupportedEncoding), (1, 24, UnsupportedEncoding), (2, 16, UnsupportedEncoding)],
)
def test_unsupported_encodings(tmp_path, tag, bits, exc):
    f = tmp_path / "bad.wav"
    _write_raw_wav(f, b"\x00" * 12, tag=tag, bits=bits)
    with pytest.raises(exc):
        load_wav(f)


def test_malformed_header(tmp_path):
    f = tmp_path / "junk.wav"
    f.write_bytes(b"RIFX" + b"\x00" * 40)
    with pytest.raises(MalformedWav):
        load_wav(f)


def test_truncated_data_chunk(tmp_path):
    f = tmp_path / "short.wav"
    _write_raw_wav(f, b"\x00" * 100)
    f.write_bytes(f.read_bytes()[:-50])
    with pytest.raises(MalformedWav):
        load_wav(f)


def test_save_zero_clip_data_size(tmp_path):
    f = tmp_path / "z.wav"
    save_wav(AudioClip(np.zeros(30000), 48000), f)
    raw = f.read_bytes()
    data_at = raw.index(b"data")
    assert struct.unpack("<I", raw[data_at + 4 : data_at + 8])[0] == 60000
    assert len(raw) == 44 + 60000


def test_full_scale_maps_to_max_code(tmp_path):
    f = tmp_path / "fs.wav"
    save_wav(AudioClip(np.array([1.0, -1.0]), 48000), f)
    codes = np.frombuffer(f.read_bytes()[44:], dtype="<i2")
    assert codes.tolist() == [32767, -32768]


def test_stereo_interleaving(tmp_path):
    f = tmp_path / "lr.wav"
    left, right = np.array([0.5, 0.25]), np.array([-0.5, -0.25])
    save_wav(AudioClip(np.vstack([left, right]), 48000), f)
    codes = np.frombuffer(f.read_bytes()[44:], dtype="<i2")
    assert codes.tolist() == [16384, -16384, 8192, -8192]


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.integers(1, 400), elements=st.floats(-1, 1)), st.sampled_from([1, 2]))
def test_round_trip_within_one_lsb(tmp_path_factory, data, channels):
    path = tmp_path_factory.mktemp("rt") / "x.wav"
    clip = AudioClip(np.vstack([data] * channels), 48000)
    save_wav(clip, path)
    back = load_wav(path)
    assert back.channels == channels
    assert np.max(np.abs(back.samples - clip.samples)) <= 1 / 32768
    # a second pass is lossless: decoded values are already on the grid
    save_wav(back, path)
    np.testing.assert_array_equal(load_wav(path).samples, back.samples)


def test_clip_rejects_unequal_or_many_channels():
    with pytest.raises(ChannelMismatch):
        AudioClip(np.zeros((3, 10)), 48000)
    with pytest.raises(ValueError):
        AudioClip(np.zeros(10), 0)


def test_normalize_peak_scales():
    clip = AudioClip(np.array([0.5, -0.25, 0.1]), 48000)
    out = normalize_peak(clip)
    np.testing.assert_allclose(out.samples[0], [1.0, -0.5, 0.2])
    assert out.peak == 1.0


def test_normalize_peak_identity_and_silence():
    clip = AudioClip(np.array([1.0, -0.3]), 48000)
    assert normalize_peak(clip) == clip
    with pytest.raises(SilentClip):
        normalize_peak(AudioClip(np.zeros(5), 48000))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(-10, 10)).filter(lambda a: np.any(np.abs(a) > 1e-6)))
def test_normalize_idempotent(data):
    once = normalize_peak(AudioClip(data, 48000))
    twice = normalize_peak(once)
    assert abs(once.peak - 1.0) < 1e-12
    assert np.max(np.abs(twice.samples - once.samples)) <= 1e-12


def test_conform_lengths():
    one_second = AudioClip(np.random.default_rng(0).normal(size=48000), 48000)
    out = conform(one_second)
    assert out.n_samples == 30000
    np.testing.assert_array_equal(out.samples, one_second.samples[:, :30000])
    assert conform(out) is out


def test_conform_pads_short_clip_and_rejects_rate():
    short = AudioClip(np.ones(100), 48000)
    out = conform(short)
    assert out.n_samples == 30000
    assert np.all(out.samples[0, :100] == 1) and np.all(out.samples[0, 100:] == 0)
    with pytest.raises(RateMismatch):
        conform(AudioClip(np.ones(100), 44100))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2000), st.floats(1, 40))
def test_conform_preserves_prefix(n, target_ms):
    x = np.arange(n, dtype=float)
    out = conform(AudioClip(x, 48000), target_ms=target_ms)
    k = min(n, out.n_samples)
    np.testing.assert_array_equal(out.samples[0, :k], x[:k])


def test_downmix_policies():
    stereo = AudioClip(np.array([[1.0, 0.2], [0.0, 0.4]]), 48000)
    assert downmix(stereo, "mix").samples[0, 0] == 0.5
    np.testing.assert_array_equal(downmix(stereo, "left").samples[0], stereo.samples[0])
    np.testing.assert_array_equal(downmix(stereo, "right").samples[0], stereo.samples[1])
    mono = AudioClip(np.array([0.1, 0.2]), 48000)
    for policy in ("mix", "left", "right"):
        assert downmix(mono, policy) == mono


def test_gain_mix_sums_to_one():
    for g in np.linspace(0, 1, 21):
        gm = GainMix(g)
        assert gm.signal_gain + gm.noise_gain == pytest.approx(1.0, abs=0)
    with pytest.raises(ValueError):
        GainMix(1.5)


def test_mix_noise_endpoints():
    rng = np.random.default_rng(1)
    s = normalize_peak(AudioClip(rng.normal(size=500), 48000))
    n = normalize_peak(AudioClip(rng.normal(size=800), 48000))
    np.testing.assert_array_equal(mix_noise(s, n, 0.0).samples, s.samples)
    np.testing.assert_array_equal(mix_noise(s, n, 1.0).samples, n.samples[:, :500])
    mid = mix_noise(s, n, 0.05)
    np.testing.assert_allclose(mid.samples, 0.95 * s.samples + 0.05 * n.samples[:, :500])


def test_mix_noise_tiles_short_noise_and_checks_layout():
    s = AudioClip(np.ones(10), 48000)
    n = AudioClip(np.array([1.0, -1.0, 0.5]), 48000)
    out = mix_noise(s, n, 1.0)
    np.testing.assert_array_equal(out.samples[0], np.tile([1.0, -1.0, 0.5], 4)[:10])
    with pytest.raises(RateMismatch):
        mix_noise(s, AudioClip(np.ones(10), 44100), 0.5)
    with pytest.raises(ChannelMismatch):
        mix_noise(s, AudioClip(np.ones((2, 10)), 48000), 0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_mix_noise_linear(g, seed):
    rng = np.random.default_rng(seed)
    s = AudioClip(rng.uniform(-1, 1, 64), 48000)
    n = AudioClip(rng.uniform(-1, 1, 64), 48000)
    total = mix_noise(s, n, g).samples + mix_noise(s, n, 1 - g).samples
    assert np.max(np.abs(total - (s.samples + n.samples))) <= 1e-12
