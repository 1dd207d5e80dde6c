import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone

from shakesense.audio import AudioClip
from shakesense.errors import ClipTooShort, ConfigDigestMismatch, NegativeFrequency, TooManyFilters
from shakesense.mfcc import (
    MfccConfig,
    MfccTransformer,
    build_mel_filterbank,
    compute_mfcc,
    dct_ortho,
    hz_to_mel,
    idct_ortho,
    load_feature_cache,
    log_mel_energies,
    mel_band_edges,
    mel_to_hz,
    n_frames_for,
    power_spectrum,
    save_feature_cache,
)

RATE = 48000


def direct_dft_power(frame, n_fft):
    """O(n^2) DFT of a zero-padded frame; independent of any FFT routine."""
    n = np.arange(len(frame))
    k = np.arange(n_fft // 2 + 1)[:, None]
    basis = np.exp(-2j * np.pi * k * n / n_fft)
    return np.abs(basis @ frame) ** 2


def test_hz_to_mel_reference_points():
    assert hz_to_mel(0) == 0.0
    assert hz_to_mel(1000) == pytest.approx(1000.0, abs=0.5)


@pytest.mark.parametrize("f", [100.0, 4000.0, 20000.0])
def test_mel_round_trip(f):
    assert mel_to_hz(hz_to_mel(f)) == pytest.approx(f, rel=1e-12)


def test_negative_frequency_rejected():
    with pytest.raises(NegativeFrequency):
        hz_to_mel(-1.0)
    with pytest.raises(NegativeFrequency):
        mel_to_hz(-0.5)


def test_filterbank_rows_nondegenerate_and_ordered():
    bank = build_mel_filterbank(MfccConfig(), RATE)
    assert bank.shape == (40, 1025)
    assert np.all(bank >= 0)
    assert np.all(bank.max(axis=1) > 0)
    assert np.all(np.diff(np.argmax(bank, axis=1)) > 0)


def test_filterbank_adjacent_overlap():
    bank = build_mel_filterbank(MfccConfig(), RATE)
    # each filter's support ends where the next-but-one starts: neighbours overlap
    for m in range(39):
        assert np.any((bank[m] > 0) & (bank[m + 1] > 0))


def test_filter_centres_match_arbitrary_precision():
    mpmath.mp.dps = 50
    n_filters, fmax, n_fft = 40, RATE / 2, 2048
    top = 2595 * mpmath.log10(1 + mpmath.mpf(fmax) / 700)
    expected_hz = [700 * (mpmath.power(10, top * (m + 1) / (n_filters + 1) / 2595) - 1) for m in range(n_filters)]
    expected_bins = np.array([float(f) * n_fft / RATE for f in expected_hz])
    bank = build_mel_filterbank(MfccConfig(n_mel_filters=n_filters, fft_size=n_fft), RATE)
    assert np.all(np.abs(np.argmax(bank, axis=1) - expected_bins) <= 1.0)
    np.testing.assert_allclose(mel_band_edges(n_filters, 0, fmax)[1:-1], [float(f) for f in expected_hz], rtol=1e-12)


def test_too_many_filters():
    with pytest.raises(TooManyFilters):
        build_mel_filterbank(MfccConfig(n_mel_filters=200, n_coeffs=13, fft_size=256), RATE)


def test_config_validation():
    with pytest.raises(ValueError):
        MfccConfig(step_ms=40.0, window_ms=30.0)
    with pytest.raises(ValueError):
        MfccConfig(n_coeffs=41, n_mel_filters=40)
    assert MfccConfig().resolved_fft_size(RATE) == 2048
    assert MfccConfig().window_samples(RATE) == 1440
    assert MfccConfig().step_samples(RATE) == 720


def test_silent_clip_gives_constant_frames():
    cfg = MfccConfig()
    seq = compute_mfcc(AudioClip(np.zeros(30000), RATE), cfg)
    assert seq.frames.shape == (40, 21)
    np.testing.assert_allclose(seq.frames[:, 0], np.sqrt(40) * np.log(1e-10), rtol=1e-12)
    np.testing.assert_allclose(seq.frames[:, 1:], 0.0, atol=1e-9)


def test_frame_count_formula():
    assert n_frames_for(30000, RATE, MfccConfig()) == (30000 - 1440) // 720 + 1 == 40
    seq = compute_mfcc(AudioClip(np.random.default_rng(0).normal(size=30000), RATE), MfccConfig())
    assert seq.n_frames == 40
    np.testing.assert_allclose(seq.frame_times[:3], [0.0, 0.015, 0.030])


def test_clip_too_short():
    with pytest.raises(ClipTooShort):
        compute_mfcc(AudioClip(np.ones(1000), RATE), MfccConfig())


def test_pure_tone_peaks_in_its_band():
    cfg = MfccConfig(window_function="rectangular")
    t = np.arange(30000) / RATE
    x = np.sin(2 * np.pi * 1000.0 * t)
    bank = build_mel_filterbank(cfg, RATE)
    log_e = log_mel_energies(x, RATE, cfg, bank)

    edges = mel_band_edges(40, 0.0, RATE / 2)
    for i, start in enumerate(range(0, 30000 - 1440 + 1, 720)):
        oracle_energy = bank @ direct_dft_power(x[start : start + 1440], 2048)
        best = int(np.argmax(oracle_energy))
        assert edges[best] < 1000.0 < edges[best + 2]
        assert int(np.argmax(log_e[i])) == best


def test_power_spectrum_matches_direct_dft():
    rng = np.random.default_rng(3)
    frames = rng.normal(size=(5, 1440))
    fast = power_spectrum(frames, 2048)
    for f, row in zip(frames, fast):
        slow = direct_dft_power(f, 2048)
        assert np.max(np.abs(row - slow) / np.maximum(slow, 1e-12 * slow.max())) < 1e-6


def test_dct_round_trip():
    x = np.random.default_rng(4).normal(size=(50, 40))
    assert np.max(np.abs(idct_ortho(dct_ortho(x)) - x)) < 1e-9


def test_dct_is_isometry():
    x = np.random.default_rng(5).normal(size=40)
    assert np.linalg.norm(dct_ortho(x)) == pytest.approx(np.linalg.norm(x), rel=1e-12)


def test_shift_by_one_step_shifts_frames():
    cfg = MfccConfig()
    x = np.random.default_rng(6).normal(size=30000 + 720)
    original = compute_mfcc(AudioClip(x[:30000], RATE), cfg).frames
    shifted = compute_mfcc(AudioClip(x[720:], RATE), cfg).frames
    np.testing.assert_array_equal(original[1:], shifted[:-1])


def test_scaling_adds_log_constant_to_c0():
    cfg = MfccConfig()
    x = np.random.default_rng(7).uniform(-1, 1, 30000)
    c = 0.5
    base = compute_mfcc(AudioClip(x, RATE), cfg).frames
    scaled = compute_mfcc(AudioClip(c * x, RATE), cfg).frames
    expected = np.sqrt(40) * np.log(c**2)
    assert np.max(np.abs((scaled[:, 0] - base[:, 0]) - expected)) < 1e-3
    np.testing.assert_allclose(scaled[:, 1:], base[:, 1:], atol=1e-3)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 2000, elements=st.floats(-1e6, 1e6)))
def test_outputs_always_finite(x):
    seq = compute_mfcc(AudioClip(x, RATE), MfccConfig(n_coeffs=27))
    assert np.all(np.isfinite(seq.frames))


def test_transformer_shapes_and_params():
    rng = np.random.default_rng(8)
    clips = [AudioClip(rng.normal(size=30000), RATE) for _ in range(3)]
    tf = MfccTransformer(n_coeffs=27).fit()
    out = tf.transform(clips)
    assert out.shape == (3, 40, 27)
    assert clone(tf).get_params()["n_coeffs"] == 27
    assert len(tf.get_feature_names_out()) == 27


def test_transformer_normalizes_to_0dbfs():
    x = np.random.default_rng(9).normal(size=30000)
    tf = MfccTransformer().fit()
    np.testing.assert_allclose(tf.transform([x * 0.01])[0], tf.transform([x])[0], atol=1e-9)


def test_transformer_variable_lengths_give_list():
    rng = np.random.default_rng(10)
    out = MfccTransformer().fit().transform([rng.normal(size=30000), rng.normal(size=20000)])
    assert isinstance(out, list) and out[0].shape[0] == 40 and out[1].shape[0] == 26


def test_transformer_stack_mode():
    rng = np.random.default_rng(11)
    stereo = AudioClip(rng.normal(size=(2, 30000)), RATE)
    tf = MfccTransformer(channels="stack").fit()
    out = tf.transform([stereo])
    assert out.shape == (1, 40, 42)
    left = MfccTransformer(channels="left", normalize=False).fit().transform([stereo])[0]
    stacked = MfccTransformer(channels="stack", normalize=False).fit().transform([stereo])[0]
    np.testing.assert_array_equal(stacked[:, :21], left)


def test_feature_cache_round_trip_and_digest_guard(tmp_path):
    feats = np.random.default_rng(12).normal(size=(4, 40, 21))
    digest = MfccConfig().digest(RATE)
    path = tmp_path / "f.npz"
    save_feature_cache(path, feats, ["a", "b", "c", "d"], digest)
    back, ids = load_feature_cache(path, digest)
    np.testing.assert_array_equal(back, feats)
    assert ids == ["a", "b", "c", "d"]
    with pytest.raises(ConfigDigestMismatch):
        load_feature_cache(path, MfccConfig(n_coeffs=27).digest(RATE))


def test_digest_depends_on_config():
    assert MfccConfig().digest(RATE) != MfccConfig(n_coeffs=27).digest(RATE)
    assert MfccConfig().digest(RATE) != MfccConfig().digest(44100)
