import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from setiedge.sigsim import ComplexTimeSeries, SignalClass, SimParams, frequency_trajectory, simulate
from setiedge.spectro import (GrayImage, Spectrogram, SpectrogramConfig, dft, frequency_to_column,
                              read_pgm, stft_power, to_gray, write_pgm, write_png)


def direct_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * kk * k / n)) for kk in k])


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_dft_zero():
    assert np.all(dft(np.zeros(16, complex)) == 0)


@pytest.mark.parametrize("k0", [0, 1, 5, 63])
def test_dft_pure_tone(k0):
    n = 64
    x = np.exp(2j * np.pi * k0 * np.arange(n) / n)
    X = dft(x)
    assert abs(X[k0] - n) / n < 1e-9
    others = np.delete(X, k0)
    assert np.max(np.abs(others)) / n < 1e-9


@pytest.mark.parametrize("n", [4, 8, 16, 64])
def test_dft_matches_direct_sum(n):
    rng = np.random.default_rng(n)
    for _ in range(50):
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        assert rel_err(dft(x), direct_dft(x)) < 1e-9


def test_dft_length_mismatch():
    with pytest.raises(ValueError):
        dft(np.zeros(10, complex), n_fft=16)


def test_stft_zero_series():
    cfg = SpectrogramConfig(n_fft=16, n_rows=4)
    spec = stft_power(ComplexTimeSeries(np.zeros(64, complex)), cfg)
    assert spec.power.shape == (4, 16) and np.all(spec.power == 0)


def test_stft_length_mismatch():
    with pytest.raises(ValueError):
        stft_power(ComplexTimeSeries(np.zeros(63, complex)), SpectrogramConfig(n_fft=16, n_rows=4))


def test_noiseless_quarter_tone_lands_at_column_384():
    p = SimParams(snr_db=math.inf, f_start=0.25)
    spec = stft_power(simulate(SignalClass.NARROWBAND, p))
    assert np.all(spec.power.argmax(axis=1) == 384)
    assert frequency_to_column(0.25, 512) == 384


def test_parseval_per_row():
    rng = np.random.default_rng(1)
    cfg = SpectrogramConfig(n_fft=64, n_rows=8)
    x = rng.normal(size=512) + 1j * rng.normal(size=512)
    spec = stft_power(ComplexTimeSeries(x), cfg)
    energy = 64 * np.sum(np.abs(x.reshape(8, 64)) ** 2, axis=1)
    np.testing.assert_allclose(spec.power.sum(axis=1), energy, rtol=1e-6)


def test_centering_is_pure_rotation():
    rng = np.random.default_rng(2)
    x = ComplexTimeSeries(rng.normal(size=256) + 1j * rng.normal(size=256))
    c = stft_power(x, SpectrogramConfig(n_fft=32, n_rows=8, center_zero_freq=True)).power
    u = stft_power(x, SpectrogramConfig(n_fft=32, n_rows=8, center_zero_freq=False)).power
    np.testing.assert_array_equal(c, np.roll(u, 16, axis=1))


@pytest.mark.parametrize("cls", [c for c in SignalClass if c != SignalClass.NOISE])
def test_energy_placement(cls):
    p = SimParams(snr_db=math.inf, f_start=0.2, drift_rate=-4e-4, curvature=1e-6, rng_seed=3)
    spec = stft_power(simulate(cls, p))
    on = spec.power.max(axis=1) > 1e-6
    cols = frequency_to_column(frequency_trajectory(cls, p), 512)
    dist = np.abs(spec.power.argmax(axis=1) - cols)
    dist = np.minimum(dist, 512 - dist)
    assert np.mean(dist[on] <= 1) >= 0.95


@pytest.mark.parametrize("bad", [dict(n_fft=12), dict(n_fft=1), dict(log_floor=0.0), dict(power_map="sqrt")])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SpectrogramConfig(**bad).validate()


def test_gray_constant_is_zero():
    img = to_gray(Spectrogram(np.full((4, 8), 3.0)))
    assert np.all(img.pixels == 0)


def test_gray_two_values():
    p = np.ones((4, 8))
    p[1, 2] = 1e6
    img = to_gray(Spectrogram(p))
    assert set(np.unique(img.pixels)) == {0, 255}


def test_gray_linear_map():
    img = to_gray(Spectrogram(np.array([[0.0, 1.0, 2.0]])), SpectrogramConfig(power_map="linear"))
    assert img.pixels.tolist() == [[0, 128, 255]]


def test_rendered_pixel_count():
    img = to_gray(stft_power(simulate(SignalClass.NOISE, SimParams(rng_seed=1))))
    assert (img.height, img.width) == (384, 512)
    assert img.pixels.size == 196608


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(0, 1e12)))
def test_gray_is_monotone(power):
    img = to_gray(Spectrogram(power)).pixels.ravel()
    order = np.argsort(power.ravel(), kind="stable")
    assert np.all(np.diff(img[order].astype(int)) >= 0)


def test_pgm_header_bytes(tmp_path):
    path = tmp_path / "a.pgm"
    write_pgm(path, GrayImage(np.array([[0, 1], [2, 3]], np.uint8)))
    assert path.read_bytes() == b"P5\n2 2\n255\n\x00\x01\x02\x03"


@settings(max_examples=20, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_pgm_round_trip(tmp_path_factory, pixels):
    path = tmp_path_factory.mktemp("pgm") / "x.pgm"
    write_pgm(path, GrayImage(pixels))
    assert np.array_equal(read_pgm(path).pixels, pixels)


def test_pgm_comment_header(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\x08")
    assert read_pgm(path).pixels.tolist() == [[7, 8]]


@pytest.mark.parametrize("data,match", [
    (b"P2\n2 2\n255\n0 1 2 3", "not a binary PGM"),
    (b"P5\n2 2\n65535\n" + bytes(8), "maxval"),
    (b"P5\n2 2\n255\n\x00\x01", "payload"),
])
def test_pgm_bad_files(tmp_path, data, match):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(ValueError, match=match):
        read_pgm(path)


def test_png_writer(tmp_path):
    from PIL import Image

    pixels = np.arange(12, dtype=np.uint8).reshape(3, 4)
    path = tmp_path / "x.png"
    write_png(path, GrayImage(pixels))
    with Image.open(path) as im:
        assert im.mode == "L"
        assert np.array_equal(np.asarray(im), pixels)
