"""rPPG extraction with POS and heart-rate tracking on its spectrogram."""

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from . import _io
from .dsp import Spectrogram, stft
from .errors import InvalidTraceError, UndefinedHrError, ValidationError

HR_BAND_BPM = (42.0, 180.0)
TRACKERS = ("peak", "weighted", "dp")
#: plane orthogonal to the skin tone in normalised RGB
POS_PROJECTION = np.array([[0.0, 1.0, -1.0], [-2.0, 1.0, 1.0]])


@dataclass
class RppgSignal:
    fps: float
    samples: np.ndarray


@dataclass
class HrTrack:
    times: np.ndarray
    bpm: np.ndarray
    method: str

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.bpm = np.asarray(self.bpm, dtype=float)
        if self.times.shape != self.bpm.shape:
            raise ValidationError("times and bpm must have equal length")

    def to_csv(self, path):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "bpm", "method"])
        for t, b in zip(self.times, self.bpm):
            w.writerow([repr(float(t)), repr(float(b)), self.method])
        _io.write_text(path, buf.getvalue())


def pos_rppg(trace, win=1.6):
    """Plane-orthogonal-to-skin pulse extraction with overlap-add.

    Each window of ceil(win * fps) frames is divided by its channel means,
    projected onto the POS plane and tuned with the ratio of the projections'
    standard deviations before being mean-removed and added into the output.
    """
    C = trace.matrix
    n = C.shape[1]
    l = int(math.ceil(win * trace.fps))
    if n < l:
        raise InvalidTraceError(f"trace of {n} frames is shorter than the {l}-frame POS window")
    if np.any(C <= 0):
        raise InvalidTraceError("POS needs strictly positive channel means")
    # (n_win, 3, l) sliding windows
    W = np.lib.stride_tricks.sliding_window_view(C, l, axis=1).transpose(1, 0, 2)
    Cn = W / W.mean(axis=2, keepdims=True)
    S = np.einsum("ij,wjl->wil", POS_PROJECTION, Cn)
    s1, s2 = S[:, 0], S[:, 1]
    sd1, sd2 = s1.std(axis=1), s2.std(axis=1)
    alpha = np.divide(sd1, sd2, out=np.zeros_like(sd1), where=sd2 > 0)
    h = s1 + alpha[:, None] * s2
    h = h - h.mean(axis=1, keepdims=True)
    out = np.zeros(n)
    for k in range(l):
        out[k:k + h.shape[0]] += h[:, k]
    return RppgSignal(fps=trace.fps, samples=out - out.mean())


def _check_spec(spec):
    if spec.magnitudes.size == 0:
        raise ValidationError("spectrogram is empty")


def hr_peak(spec):
    """Per column, the frequency of the largest squared magnitude."""
    _check_spec(spec)
    P = spec.power
    for j in range(P.shape[1]):
        if not np.any(P[:, j] > 0):
            raise UndefinedHrError(f"spectrogram column {j} is all zero", column=j)
    return HrTrack(spec.times, 60.0 * spec.freqs[np.argmax(P, axis=0)], "peak")


def hr_weighted(spec):
    """Per column, the energy-weighted mean frequency."""
    _check_spec(spec)
    P = spec.power
    tot = P.sum(axis=0)
    bad = np.flatnonzero(tot <= 0)
    if bad.size:
        raise UndefinedHrError(f"spectrogram column {bad[0]} has no energy", column=int(bad[0]))
    return HrTrack(spec.times, 60.0 * (spec.freqs @ P) / tot, "weighted")


def dp_trace(score, jump_penalty, max_jump):
    """Path f_1..f_T maximising sum score[f_t, t] - jump_penalty * sum |f_t - f_{t-1}|.

    Steps are limited to ``max_jump`` rows.  Returns (path, objective).
    Ties prefer the smaller step, then the lower row.
    """
    F, T = score.shape
    J = int(min(max_jump, F - 1))
    acc = score[:, 0].astype(float).copy()
    back = np.zeros((F, T), dtype=np.int64)
    rows = np.arange(F)
    # candidate steps ordered by |d| so argmax keeps the smallest step on ties
    steps = sorted(range(-J, J + 1), key=lambda d: (abs(d), d))
    for t in range(1, T):
        cand = np.full((len(steps), F), -np.inf)
        for k, d in enumerate(steps):
            src = rows - d
            ok = (src >= 0) & (src < F)
            cand[k, ok] = acc[src[ok]] - jump_penalty * abs(d)
        best = np.argmax(cand, axis=0)
        back[:, t] = rows - np.array(steps)[best]
        acc = cand[best, rows] + score[:, t]
    path = np.empty(T, dtype=np.int64)
    path[-1] = int(np.argmax(acc))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[path[t], t]
    return path, float(acc[path[-1]])


def path_score(score, path, jump_penalty):
    gain = score[path, np.arange(path.size)].sum()
    return float(gain - jump_penalty * np.abs(np.diff(path)).sum())


def hr_dp(spec, jump_penalty=0.5, max_jump=10, floor=1e-12):
    """Single-trace dynamic-programming tracker on log magnitudes.

    Magnitudes are floored at ``floor`` times the spectrogram maximum before
    the log so empty bins stay finite.
    """
    _check_spec(spec)
    M = spec.magnitudes
    eps = floor * M.max() if M.max() > 0 else floor
    score = np.log(M + eps)
    path, _ = dp_trace(score, jump_penalty, max_jump)
    return HrTrack(spec.times, 60.0 * spec.freqs[path], "dp")


def hr_at(track, t):
    """HR of the track entry nearest in time; ends clamp, ties take the earlier entry."""
    if track.times.size == 0:
        raise ValidationError("HR track is empty")
    t = np.asarray(t, dtype=float)
    j = np.searchsorted(track.times, t)
    j = np.clip(j, 1, track.times.size - 1) if track.times.size > 1 else np.zeros_like(j)
    if track.times.size > 1:
        left = track.times[j - 1]
        right = track.times[j]
        j = np.where(np.abs(t - left) <= np.abs(right - t), j - 1, j)
    out = track.bpm[j]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PulseConfig:
    pos_window: float = 1.6
    stft_window: float = 10.0
    stft_hop: float = 1.0
    fft_pad: int = 1
    band: Tuple[float, float] = (0.7, 3.0)
    tracker: str = "dp"
    jump_penalty: float = 0.5
    max_jump: int = 10

    def __post_init__(self):
        if self.tracker not in TRACKERS:
            raise ValidationError(f"tracker must be one of {TRACKERS}, got {self.tracker!r}")
        if not 0 < self.band[0] < self.band[1]:
            raise ValidationError("HR band must be increasing and positive")
        if self.pos_window <= 0 or self.stft_window <= 0 or self.stft_hop <= 0:
            raise ValidationError("POS window, STFT window and hop must be positive")


def track(spec, cfg=PulseConfig(), method=None):
    method = method or cfg.tracker
    if method == "peak":
        return hr_peak(spec)
    if method == "weighted":
        return hr_weighted(spec)
    if method == "dp":
        return hr_dp(spec, cfg.jump_penalty, cfg.max_jump)
    raise ValidationError(f"unknown tracker {method!r}")


def rppg_spectrogram(trace, cfg=PulseConfig()):
    sig = pos_rppg(trace, cfg.pos_window)
    spec = stft(sig.samples, trace.fps, cfg.stft_window, cfg.stft_hop, cfg.fft_pad, cfg.band)
    if trace.t0:
        spec = replace(spec, times=spec.times + trace.t0)
    return sig, spec
