"""Windowed DC/AC extraction and the six-dimensional ratio-of-ratios features."""

import csv
import io
from dataclasses import dataclass, field, fields
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import find_peaks

from . import _io
from .dsp import design_butterworth, filtfilt
from .errors import (
    InsufficientSamplesError,
    InvalidDcError,
    SchemaError,
    Spo2Error,
    UndefinedAcError,
    ValidationError,
)
from .ingest import resample_reference
from .pulse import hr_at

AC_MODES = ("narrow_abp", "wide_abp", "fixed_band", "none")
AC_ESTIMATORS = ("peak_to_valley_mean", "peak_to_valley_median", "stddev")
CSV_COLUMNS = ("i", "t_center", "R_r", "R_g", "R_b", "ratio_rg", "ratio_rb", "ratio_gb",
               "hr_used", "label")
#: extrema closer than this fraction of a pulse period are merged
PEAK_DISTANCE = 0.4


@dataclass(frozen=True)
class WindowPlan:
    window: float
    step: float
    fps: float
    starts: np.ndarray
    ends: np.ndarray

    @property
    def L(self):
        return self.starts.size

    @property
    def centers(self):
        """Window centre times in seconds from the first sample."""
        return (self.starts + self.ends) / (2.0 * self.fps)


def plan_windows(duration, fps, window=10.0, step=1.0):
    if window <= 0 or step <= 0 or fps <= 0:
        raise ValidationError("window, step and fps must be positive")
    if duration + 1e-9 < window:
        raise InsufficientSamplesError(f"{duration} s is shorter than one {window} s window")
    L = int(np.floor((duration - window) / step + 1e-9)) + 1
    n = int(round(duration * fps))
    starts = np.rint(np.arange(L) * step * fps).astype(int)
    ends = starts + int(round(window * fps))
    keep = ends <= n
    return WindowPlan(float(window), float(step), float(fps), starts[keep], ends[keep])


@dataclass(frozen=True)
class AcExtractorConfig:
    mode: str = "narrow_abp"
    half_bandwidth: Optional[float] = None
    fixed_band: Tuple[float, float] = (1.0, 2.0)
    ac_estimator: str = "peak_to_valley_mean"
    order: int = 8
    context: float = 10.0

    def __post_init__(self):
        if self.mode not in AC_MODES:
            raise ValidationError(f"AC mode must be one of {AC_MODES}, got {self.mode!r}")
        if self.ac_estimator not in AC_ESTIMATORS:
            raise ValidationError(f"AC estimator must be one of {AC_ESTIMATORS}")
        if not 0 < self.fixed_band[0] < self.fixed_band[1]:
            raise ValidationError("fixed band must be increasing and positive")
        if self.half_bandwidth is not None and self.half_bandwidth <= 0:
            raise ValidationError("half_bandwidth must be positive")

    @property
    def hbw(self):
        if self.half_bandwidth is not None:
            return self.half_bandwidth
        return 0.5 if self.mode == "wide_abp" else 0.1

    @property
    def adaptive(self):
        return self.mode in ("narrow_abp", "wide_abp")


def dc_component(x, fps, plan, order=2, cutoff=0.1):
    """Median of the zero-phase lowpass-filtered channel inside each window."""
    x = np.asarray(x, dtype=float)
    lp = filtfilt(design_butterworth("lowpass", order, cutoff, fps), x)
    dc = np.array([np.median(lp[a:b]) for a, b in zip(plan.starts, plan.ends)])
    bad = np.flatnonzero(~(dc > 0))
    if bad.size:
        raise InvalidDcError(f"non-positive DC in window {bad[0]}")
    return dc


def alternating_extrema(x, min_distance):
    """Indices of alternating maxima and minima of ``x``."""
    d = max(1, int(min_distance))
    pk, _ = find_peaks(x, distance=d)
    vl, _ = find_peaks(-x, distance=d)
    ext = sorted([(i, 1) for i in pk] + [(i, -1) for i in vl])
    out = []
    for i, kind in ext:
        if out and out[-1][1] == kind:
            j = out[-1][0]
            # keep the more extreme of two same-kind neighbours
            if (kind == 1 and x[i] > x[j]) or (kind == -1 and x[i] < x[j]):
                out[-1] = (i, kind)
            continue
        out.append((i, kind))
    return np.array([i for i, _ in out], dtype=int)


def ac_amplitude(y, fps, pulse_hz, estimator="peak_to_valley_mean"):
    """AC magnitude of one filtered window."""
    if estimator == "stddev":
        amp = float(np.std(y))
        if not amp > 0:
            raise UndefinedAcError("window has no variation")
        return amp
    ext = alternating_extrema(y, PEAK_DISTANCE / pulse_hz * fps)
    if ext.size < 3:
        raise UndefinedAcError("fewer than one full oscillation in the window")
    p2v = np.abs(np.diff(y[ext]))
    return float(np.mean(p2v) if estimator == "peak_to_valley_mean" else np.median(p2v))


def _band_for(cfg, hr_hz, fps):
    if cfg.mode == "fixed_band":
        lo, hi = cfg.fixed_band
    else:
        lo, hi = hr_hz - cfg.hbw, hr_hz + cfg.hbw
    lo = max(lo, 0.05)
    hi = min(hi, 0.49 * fps)
    if not lo < hi:
        raise UndefinedAcError(f"empty passband around {hr_hz:.3f} Hz")
    return lo, hi


def window_hr(hr, plan, t0=0.0):
    """Track HR (Hz) at every window centre, or None without a track."""
    if hr is None:
        return None
    return np.atleast_1d(hr_at(hr, t0 + plan.centers)) / 60.0


def ac_component(x, fps, plan, hr, cfg=AcExtractorConfig(), t0=0.0):
    """Per-window AC magnitude; NaN marks windows where it is undefined.

    Each window is filtered together with ``cfg.context`` seconds of
    neighbouring samples on both sides and cropped afterwards.  Missing
    context at the ends of the signal is made up by odd reflection.
    """
    x = np.asarray(x, dtype=float)
    if cfg.adaptive and hr is None:
        raise ValidationError(f"AC mode {cfg.mode} needs an HR track")
    hz = window_hr(hr, plan, t0) if cfg.adaptive else None
    ctx = int(round(cfg.context * fps))
    out = np.full(plan.L, np.nan)
    fixed_filter = None
    if cfg.mode == "fixed_band":
        fixed_filter = design_butterworth("bandpass", cfg.order, _band_for(cfg, 0, fps), fps)
    for i, (a, b) in enumerate(zip(plan.starts, plan.ends)):
        lo, hi = max(0, a - ctx), min(x.size, b + ctx)
        seg = x[lo:hi]
        try:
            if cfg.mode == "none":
                w = x[a:b]
                tt = np.arange(w.size)
                y = w - np.polyval(np.polyfit(tt, w, 1), tt)
                pulse_hz = 3.0
            else:
                if cfg.adaptive:
                    pulse_hz = hz[i]
                    filt = design_butterworth("bandpass", cfg.order,
                                              _band_for(cfg, pulse_hz, fps), fps)
                else:
                    filt = fixed_filter
                    pulse_hz = cfg.fixed_band[1]
                missing = max(ctx - (a - lo), ctx - (hi - b), 0)
                pad = min(max(3 * filt.order, missing), seg.size - 1)
                y = filtfilt(filt, seg, padlen=pad)[a - lo:b - lo]
            amp = ac_amplitude(y, fps, pulse_hz, cfg.ac_estimator)
            # filter round-off on a flat window is not a pulse
            if amp <= 1e-9 * np.max(np.abs(seg)):
                raise UndefinedAcError("window has no variation")
            out[i] = amp
        except UndefinedAcError:
            pass
    return out


@dataclass
class FeatureRow:
    i: int
    t_center: float
    R_r: float
    R_g: float
    R_b: float
    ratio_rg: float
    ratio_rb: float
    ratio_gb: float
    hr_used: float = float("nan")
    label: Optional[float] = None
    source: Optional[Tuple[str, str]] = field(default=None, compare=False)

    @property
    def vector(self):
        return np.array([self.R_r, self.R_g, self.R_b, self.ratio_rg, self.ratio_rb, self.ratio_gb])


@dataclass
class FeatureSet:
    rows: List[FeatureRow]
    skipped: List[Tuple[int, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def matrix(self, names=("R_r", "R_g", "R_b", "ratio_rg", "ratio_rb", "ratio_gb")):
        return np.array([[getattr(r, n) for n in names] for r in self.rows], dtype=float).reshape(
            len(self.rows), len(names))

    def labels(self):
        return np.array([np.nan if r.label is None else r.label for r in self.rows], dtype=float)

    @property
    def labelled(self):
        return all(r.label is not None and np.isfinite(r.label) for r in self.rows)

    def times(self):
        return np.array([r.t_center for r in self.rows])

    def with_source(self, participant, session):
        for r in self.rows:
            r.source = (str(participant), str(session))
        return self

    def to_csv(self, path):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.i] + [repr(float(getattr(r, c))) for c in CSV_COLUMNS[1:-1]]
                       + ["" if r.label is None else repr(float(r.label))])
        _io.write_text(path, buf.getvalue())

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise SchemaError(f"{path}: missing feature column(s) {', '.join(missing)}")
            rows = []
            for rec in reader:
                try:
                    label = rec["label"].strip()
                    rows.append(FeatureRow(
                        i=int(rec["i"]),
                        **{c: float(rec[c]) for c in CSV_COLUMNS[1:-1]},
                        label=float(label) if label else None))
                except ValueError as exc:
                    raise SchemaError(f"{path}: bad feature row {rec!r}: {exc}") from None
        return cls(rows)


def window_labels(ref, plan, t0=0.0, rate=1.0):
    """Mean reference SpO2 over each window (reference resampled to ``rate`` Hz)."""
    if ref is None:
        return [None] * plan.L
    r = resample_reference(ref, rate)
    t = r.times
    out = []
    for a, b in zip(plan.starts, plan.ends):
        ts, te = t0 + a / plan.fps, t0 + b / plan.fps
        sel = (t >= ts - 1e-9) & (t < te - 1e-9)
        out.append(float(r.spo2[sel].mean()) if sel.any() else None)
    return out


def feature_rows(trace, hr, ref=None, cfg=AcExtractorConfig(), plan=None, dc_order=2,
                 dc_cutoff=0.1):
    """Feature rows for every window; windows without a valid AC or DC are skipped."""
    if plan is None:
        plan = plan_windows(trace.duration, trace.fps)
    if plan.fps != trace.fps:
        raise ValidationError("window plan and trace disagree on fps")
    ratios = {}
    for c in "rgb":
        x = trace.channel(c)
        dc = dc_component(x, trace.fps, plan, dc_order, dc_cutoff)
        ac = ac_component(x, trace.fps, plan, hr, cfg, t0=trace.t0)
        ratios[c] = ac / dc
    hz = window_hr(hr, plan, trace.t0)
    labels = window_labels(ref, plan, trace.t0)
    rows, skipped = [], []
    for i in range(plan.L):
        R = [ratios[c][i] for c in "rgb"]
        if not all(np.isfinite(v) and v > 0 for v in R):
            bad = "".join(c for c, v in zip("rgb", R) if not (np.isfinite(v) and v > 0))
            skipped.append((i, f"undefined AC in channel(s) {bad}"))
            continue
        rows.append(FeatureRow(
            i=i, t_center=float(trace.t0 + plan.centers[i]),
            R_r=R[0], R_g=R[1], R_b=R[2],
            ratio_rg=R[0] / R[1], ratio_rb=R[0] / R[2], ratio_gb=R[1] / R[2],
            hr_used=float(hz[i] * 60.0) if hz is not None else float("nan"),
            label=labels[i]))
    return FeatureSet(rows, skipped)


def two_channel_ror(rows):
    """Red/blue ratio of ratios per window."""
    rows = rows.rows if isinstance(rows, FeatureSet) else rows
    return np.array([r.ratio_rb for r in rows], dtype=float)


def baseline_contact_features(trace, plan=None, variant="scully"):
    """Classic contact-oximetry RoR of red over blue per window.

    scully: DC is the window mean and AC the window standard deviation.
    lu: AC is the median peak-to-valley amplitude of the detrended window.
    """
    if plan is None:
        plan = plan_windows(trace.duration, trace.fps)
    if variant not in ("scully", "lu"):
        raise ValidationError(f"unknown baseline variant {variant!r}")
    out = np.empty(plan.L)
    for i, (a, b) in enumerate(zip(plan.starts, plan.ends)):
        R = []
        for c in ("r", "b"):
            w = trace.channel(c)[a:b]
            dc = w.mean()
            if not dc > 0:
                raise InvalidDcError(f"non-positive DC in window {i}")
            if variant == "scully":
                ac = w.std()
                if not ac > 0:
                    raise UndefinedAcError(f"zero AC in window {i}")
            else:
                tt = np.arange(w.size)
                y = w - np.polyval(np.polyfit(tt, w, 1), tt)
                if not np.any(np.abs(y) > 1e-12 * max(1.0, abs(dc))):
                    raise UndefinedAcError(f"zero AC in window {i}")
                ac = ac_amplitude(y, trace.fps, 3.0, "peak_to_valley_median")
            R.append(ac / dc)
        out[i] = R[0] / R[1]
    return out
