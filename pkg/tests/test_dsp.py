import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import signal as sps

from rgbspo2 import dsp
from rgbspo2.errors import InsufficientSamplesError, InvalidDesignError


def lp():
    return dsp.design_butterworth("lowpass", 2, 0.1, 30.0)


def test_lowpass_dc_and_cutoff():
    f = lp()
    assert f.gain([0.0])[0] == pytest.approx(1.0, abs=1e-9)
    assert f.gain([0.1])[0] == pytest.approx(1 / np.sqrt(2), rel=1e-6)
    assert f.is_stable()


def test_bandpass_matches_reference_tool():
    f = dsp.design_butterworth("bandpass", 8, (1.1, 1.3), 30.0)
    b, a = sps.butter(4, [1.1, 1.3], btype="bandpass", fs=30.0)
    ours_b, ours_a = f.b / f.a[0], f.a / f.a[0]
    np.testing.assert_allclose(ours_a, a, atol=1e-8, rtol=0)
    np.testing.assert_allclose(ours_b, b, atol=1e-8, rtol=0)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 6])
def test_lowpass_matches_reference_tool(order):
    f = dsp.design_butterworth("lowpass", order, 2.0, 30.0)
    b, a = sps.butter(order, 2.0, fs=30.0)
    freqs = np.linspace(0, 14.9, 200)
    _, h = sps.freqz(b, a, worN=freqs, fs=30.0)
    np.testing.assert_allclose(f.response(freqs), h, atol=1e-9)


def test_bandpass_sections_and_order():
    f = dsp.design_butterworth("bandpass", 8, (1.0, 1.4), 30.0)
    assert f.sos.shape == (4, 6)
    assert f.poles.size == 8


@pytest.mark.parametrize("bad", [
    ("lowpass", 2, 15.0, 30.0), ("lowpass", 0, 1.0, 30.0), ("lowpass", 2, -1.0, 30.0),
    ("bandpass", 8, (1.3, 1.1), 30.0), ("bandpass", 7, (1.0, 2.0), 30.0),
    ("highpass", 2, 1.0, 30.0), ("lowpass", 2, 1.0, 0.0)])
def test_invalid_designs(bad):
    with pytest.raises(InvalidDesignError):
        dsp.design_butterworth(*bad)


@given(fc=st.floats(0.05, 10.0), order=st.integers(1, 8))
def test_lowpass_property(fc, order):
    f = dsp.design_butterworth("lowpass", order, fc, 30.0)
    assert f.is_stable()
    assert f.gain([fc])[0] == pytest.approx(1 / np.sqrt(2), rel=1e-6)
    assert f.gain([0.0])[0] == pytest.approx(1.0, abs=1e-9)


@given(hr=st.floats(0.75, 3.0), hbw=st.sampled_from([0.1, 0.5]))
def test_bandpass_property(hr, hbw):
    f = dsp.design_butterworth("bandpass", 8, (max(hr - hbw, 0.05), hr + hbw), 30.0)
    assert f.is_stable()
    lo, hi = f.cutoffs
    for edge in (lo, hi):
        assert f.gain([edge])[0] == pytest.approx(1 / np.sqrt(2), rel=1e-6)
    assert f.gain([np.sqrt(lo * hi)]).max() >= 0.99


def _fit_sine(x, t, f0):
    A = np.column_stack([np.sin(2 * np.pi * f0 * t), np.cos(2 * np.pi * f0 * t), np.ones_like(t)])
    c, *_ = np.linalg.lstsq(A, x, rcond=None)
    return np.hypot(c[0], c[1]), np.arctan2(c[1], c[0])


def test_filtfilt_passband_zero_lag():
    fs, f0 = 30.0, 1.2
    t = np.arange(600) / fs
    x = np.sin(2 * np.pi * f0 * t)
    f = dsp.design_butterworth("bandpass", 8, (1.0, 1.4), fs)
    y = dsp.filtfilt(f, x)
    core = slice(150, 450)
    amp, ph = _fit_sine(y[core], t[core], f0)
    amp0, ph0 = _fit_sine(x[core], t[core], f0)
    assert amp == pytest.approx(amp0, rel=0.01)
    assert abs(ph - ph0) < 1e-2


def test_filtfilt_constant_and_stopband():
    fs = 30.0
    f = lp()
    y = dsp.filtfilt(f, np.full(900, 123.0))
    np.testing.assert_allclose(y, 123.0, atol=1e-6)
    t = np.arange(1800) / fs
    # forward-backward squares the gain; analog value 1 / (1 + (f / fc)^4)
    y = dsp.filtfilt(f, np.sin(2 * np.pi * 0.3 * t))
    amp, _ = _fit_sine(y[600:1200], t[600:1200], 0.3)
    assert amp == pytest.approx(f.gain([0.3])[0] ** 2, rel=1e-4)
    assert amp == pytest.approx(1 / (1 + 3 ** 4), rel=1e-2)
    # a 1.2 Hz pulse ripple is attenuated by at least 40 dB
    y = dsp.filtfilt(f, np.sin(2 * np.pi * 1.2 * t))
    amp, _ = _fit_sine(y[600:1200], t[600:1200], 1.2)
    assert 20 * np.log10(amp) <= -40


def test_bandpass_stopband_three_times_upper_cutoff():
    fs = 30.0
    t = np.arange(1800) / fs
    f = dsp.design_butterworth("bandpass", 8, (1.1, 1.3), fs)
    y = dsp.filtfilt(f, np.sin(2 * np.pi * 3.9 * t))
    amp, _ = _fit_sine(y[600:1200], t[600:1200], 3.9)
    assert 20 * np.log10(amp) <= -40


def test_filtfilt_matches_scipy_odd_padding(rng):
    f = dsp.design_butterworth("bandpass", 4, (1.0, 2.0), 30.0)
    x = rng.normal(size=300)
    ours = dsp.filtfilt(f, x, padlen=30)
    ref = sps.sosfiltfilt(f.sos, x, padtype="odd", padlen=30)
    np.testing.assert_allclose(ours, ref, atol=1e-10)


def test_filtfilt_too_short():
    with pytest.raises(InsufficientSamplesError):
        dsp.filtfilt(lp(), np.ones(5))


def test_stft_single_tone():
    fs = 30.0
    x = np.sin(2 * np.pi * 1.2 * np.arange(1800) / fs)
    spec = dsp.stft(x, fs)
    peaks = spec.freqs[np.argmax(spec.magnitudes, axis=0)]
    assert np.all(np.abs(peaks - 1.2) <= 0.01)
    assert np.diff(spec.freqs).max() <= 0.01
    assert spec.times[0] == pytest.approx(5.0)
    assert np.allclose(np.diff(spec.times), 1.0)


def test_stft_zero_signal():
    spec = dsp.stft(np.zeros(600), 30.0)
    assert np.all(spec.magnitudes == 0)


def test_stft_parseval(rng):
    fs = 30.0
    x = rng.normal(size=600)
    spec = dsp.stft(x, fs, band=None)
    nwin = 300
    seg = x[:nwin] - x[:nwin].mean()
    energy = np.sum((seg * np.hanning(nwin)) ** 2)
    nfft = dsp.fft_size(nwin, fs)
    m = spec.magnitudes[:, 0]
    # one-sided spectrum: interior bins count twice
    total = (m[0] ** 2 + m[-1] ** 2 + 2 * np.sum(m[1:-1] ** 2)) / nfft
    assert total == pytest.approx(energy, rel=1e-6)


def test_stft_window_too_long():
    with pytest.raises(InsufficientSamplesError):
        dsp.stft(np.zeros(100), 30.0)


def test_moving_average_examples():
    np.testing.assert_allclose(dsp.moving_average([4.0] * 7, 3), 4.0)
    np.testing.assert_allclose(dsp.moving_average([0, 10, 0], 3), [5, 10 / 3, 5])


def naive_ma(x, w):
    back, fwd = w // 2, w - 1 - w // 2
    out = []
    for i in range(len(x)):
        vals = [x[j] for j in range(i - back, i + fwd + 1) if 0 <= j < len(x)]
        out.append(sum(vals) / len(vals))
    return np.array(out)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60), st.integers(1, 15))
def test_moving_average_naive(x, w):
    np.testing.assert_allclose(dsp.moving_average(x, w), naive_ma(x, w), atol=1e-9)


def test_spectrogram_csv(tmp_path):
    spec = dsp.stft(np.sin(np.arange(600)), 30.0)
    spec.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert len(rows) == spec.freqs.size + 1
