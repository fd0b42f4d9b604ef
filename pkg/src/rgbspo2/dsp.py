"""Signal primitives: Butterworth design, zero-phase filtering, STFT, moving average."""

import csv
import io
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import signal as sps

from . import _io
from .errors import InsufficientSamplesError, InvalidDesignError, ValidationError


@dataclass(frozen=True)
class IirFilter:
    """Digital IIR filter stored as cascaded second-order sections.

    ``sos`` rows are ``[b0, b1, b2, 1, a1, a2]``.  ``order`` is the order of
    the complete digital filter.
    """

    sos: np.ndarray
    kind: str
    order: int
    cutoffs: Tuple[float, ...]
    fs: float

    @property
    def b(self):
        return _expand(self.sos[:, :3])

    @property
    def a(self):
        return _expand(self.sos[:, 3:])

    @property
    def poles(self):
        return np.concatenate([np.roots(sec[3:]) for sec in self.sos])

    def is_stable(self, margin=1e-9):
        return bool(np.all(np.abs(self.poles) < 1.0 - margin))

    def response(self, freqs):
        """Complex frequency response at ``freqs`` (Hz)."""
        z = np.exp(1j * 2 * np.pi * np.asarray(freqs, dtype=float) / self.fs)
        h = np.ones_like(z)
        for sec in self.sos:
            h = h * np.polyval(sec[2::-1], 1 / z) / np.polyval(sec[:2:-1], 1 / z)
        return h

    def gain(self, freqs):
        return np.abs(self.response(freqs))


def _expand(rows):
    poly = np.array([1.0])
    for r in rows:
        poly = np.convolve(poly, r)
    # drop padding zeros that first-order sections carry in their last tap
    return np.trim_zeros(poly, "b") if poly.size > 1 else poly


def _prewarp(f, fs):
    return 2.0 * fs * np.tan(np.pi * f / fs)


def _bilinear(s, fs):
    return (2.0 * fs + s) / (2.0 * fs - s)


def _prototype_poles(n):
    """Left-half-plane poles of the unit-cutoff analog Butterworth lowpass."""
    k = np.arange(n)
    return np.exp(1j * np.pi * (2 * k + n + 1) / (2 * n))


def _pair_poles(z):
    """Group digital poles into conjugate pairs, then leftover reals in pairs."""
    z = np.asarray(z)
    cplx = z[z.imag > 1e-12]
    reals = np.sort(z[np.abs(z.imag) <= 1e-12].real)
    pairs = [(p, np.conj(p)) for p in sorted(cplx, key=lambda p: abs(p))]
    while reals.size >= 2:
        pairs.append((reals[0], reals[1]))
        reals = reals[2:]
    single = reals[0] if reals.size else None
    return pairs, single


def design_butterworth(kind, order, cutoffs, fs):
    """Butterworth lowpass or bandpass via the pre-warped bilinear transform.

    For ``kind="bandpass"`` the ``order`` is that of the final digital filter,
    so an order-8 bandpass comes from an order-4 analog prototype.  Every
    section is normalised to unit gain at DC (lowpass) or at the band's
    digital centre frequency (bandpass).
    """
    cut = np.atleast_1d(np.asarray(cutoffs, dtype=float))
    if fs <= 0:
        raise InvalidDesignError("sample rate must be positive")
    if int(order) != order or order < 1:
        raise InvalidDesignError(f"order must be a positive integer, got {order}")
    order = int(order)
    nyq = fs / 2.0
    if np.any(cut <= 0) or np.any(cut >= nyq):
        raise InvalidDesignError(f"cutoffs {cut.tolist()} must lie strictly inside (0, {nyq})")

    if kind == "lowpass":
        if cut.size != 1:
            raise InvalidDesignError("lowpass takes one cutoff")
        wc = _prewarp(cut[0], fs)
        s_poles = wc * _prototype_poles(order)
        z_poles = _bilinear(s_poles, fs)
        pairs, single = _pair_poles(z_poles)
        sections = []
        for p1, p2 in pairs:
            b = np.array([1.0, 2.0, 1.0])
            a = np.real(np.poly([p1, p2]))
            sections.append(np.concatenate([b * a.sum() / b.sum(), a]))
        if single is not None:
            b = np.array([1.0, 1.0, 0.0])
            a = np.array([1.0, -single.real, 0.0])
            sections.append(np.concatenate([b * a.sum() / b.sum(), a]))
        cutoffs_t = (float(cut[0]),)
    elif kind == "bandpass":
        if cut.size != 2 or not cut[0] < cut[1]:
            raise InvalidDesignError("bandpass takes two increasing cutoffs")
        if order % 2:
            raise InvalidDesignError("bandpass order must be even")
        w1, w2 = _prewarp(cut[0], fs), _prewarp(cut[1], fs)
        w0, bw = np.sqrt(w1 * w2), w2 - w1
        proto = _prototype_poles(order // 2)
        disc = np.sqrt((proto * bw) ** 2 - 4.0 * w0 ** 2 + 0j)
        s_poles = np.concatenate([(proto * bw + disc) / 2.0, (proto * bw - disc) / 2.0])
        z_poles = _bilinear(s_poles, fs)
        pairs, single = _pair_poles(z_poles)
        if single is not None:
            raise InvalidDesignError("bandpass design produced an unpaired pole")
        f_center = fs / np.pi * np.arctan(w0 / (2.0 * fs))
        zc = np.exp(1j * 2 * np.pi * f_center / fs)
        sections = []
        for p1, p2 in pairs:
            b = np.array([1.0, 0.0, -1.0])
            a = np.real(np.poly([p1, p2]))
            g = abs(np.polyval(a, zc) / np.polyval(b, zc))
            sections.append(np.concatenate([b * g, a]))
        cutoffs_t = (float(cut[0]), float(cut[1]))
    else:
        raise InvalidDesignError(f"unknown filter kind {kind!r}")
    return IirFilter(sos=np.array(sections), kind=kind, order=order, cutoffs=cutoffs_t, fs=float(fs))


def filtfilt(f, x, padlen=None):
    """Forward-backward filtering with odd-reflection padding.

    ``padlen`` defaults to three times the filter order.  Each pass starts
    from the steady state of the first padded sample.
    """
    x = np.asarray(x, dtype=float)
    if padlen is None:
        padlen = 3 * f.order
    if x.ndim != 1 or x.size <= max(padlen, 3 * f.order):
        raise InsufficientSamplesError(
            f"filtfilt needs more than {max(padlen, 3 * f.order)} samples, got {x.size}"
        )
    if padlen:
        head = 2 * x[0] - x[padlen:0:-1]
        tail = 2 * x[-1] - x[-2:-padlen - 2:-1]
        ext = np.concatenate([head, x, tail])
    else:
        ext = x
    zi = sps.sosfilt_zi(f.sos)
    y, _ = sps.sosfilt(f.sos, ext, zi=zi * ext[0])
    y = y[::-1]
    y, _ = sps.sosfilt(f.sos, y, zi=zi * y[0])
    y = y[::-1]
    return y[padlen:padlen + x.size] if padlen else y


@dataclass
class Spectrogram:
    magnitudes: np.ndarray  # (F, T)
    freqs: np.ndarray
    times: np.ndarray
    window: float
    hop: float

    def __post_init__(self):
        if self.magnitudes.shape != (self.freqs.size, self.times.size):
            raise ValidationError("magnitude grid does not match freqs x times")

    @property
    def power(self):
        return self.magnitudes ** 2

    def band(self, lo, hi):
        keep = (self.freqs >= lo) & (self.freqs <= hi)
        return Spectrogram(self.magnitudes[keep], self.freqs[keep], self.times,
                           self.window, self.hop)

    def to_csv(self, path):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["freq"] + [repr(float(t)) for t in self.times])
        for f, row in zip(self.freqs, self.magnitudes):
            w.writerow([repr(float(f))] + [repr(float(v)) for v in row])
        _io.write_text(path, buf.getvalue())


def fft_size(nwin, fs, fft_pad=1, max_spacing=0.01):
    need = max(int(np.ceil(fft_pad * nwin)), int(np.ceil(fs / max_spacing)))
    return 1 << int(np.ceil(np.log2(need)))


def stft(x, fs, win=10.0, hop=1.0, fft_pad=1, band: Optional[Tuple[float, float]] = (0.7, 3.0)):
    """Magnitude STFT of mean-removed, Hann-windowed segments.

    The FFT is zero-padded so bins are no wider than 0.01 Hz.  Columns are
    stamped with segment centre times; rows are cut to ``band`` (Hz) unless
    ``band`` is None.
    """
    x = np.asarray(x, dtype=float)
    nwin = int(round(win * fs))
    nhop = int(round(hop * fs))
    if hop <= 0 or nhop < 1:
        raise ValidationError("hop must be positive")
    if nwin < 2 or nwin > x.size:
        raise InsufficientSamplesError(f"window of {win} s exceeds the {x.size / fs:.2f} s signal")
    nfft = fft_size(nwin, fs, fft_pad)
    starts = np.arange(0, x.size - nwin + 1, nhop)
    segs = np.lib.stride_tricks.sliding_window_view(x, nwin)[starts]
    segs = segs - segs.mean(axis=1, keepdims=True)
    mags = np.abs(np.fft.rfft(segs * np.hanning(nwin), n=nfft, axis=1)).T
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    spec = Spectrogram(mags, freqs, (starts + nwin / 2.0) / fs, float(win), float(hop))
    return spec if band is None else spec.band(*band)


def moving_average(x, window):
    """Centred moving mean; the window shrinks at both edges.

    An even window reaches ``window // 2`` samples back and one fewer forward.
    """
    x = np.asarray(x, dtype=float)
    window = int(window)
    if window < 1:
        raise ValidationError("window must be at least 1")
    n = x.size
    if n == 0:
        return x.copy()
    back = window // 2
    fwd = window - 1 - back
    idx = np.arange(n)
    lo = np.maximum(idx - back, 0)
    hi = np.minimum(idx + fwd, n - 1) + 1
    c = np.concatenate([[0.0], np.cumsum(x)])
    return (c[hi] - c[lo]) / (hi - lo)
