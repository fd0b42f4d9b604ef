"""Loading frames, RGB traces and oximeter references, and time alignment."""

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import _io
from .errors import (
    CorruptInputError,
    EmptySessionError,
    InvalidHeaderError,
    InvalidTraceError,
    SchemaError,
    ValidationError,
)

#: Oximeter reporting delay measured for the index finger, seconds.
OXIMETER_DELAY = 1.8

HEADER_SUFFIX = ".json"


@dataclass
class FrameSequence:
    width: int
    height: int
    fps: float
    frames: np.ndarray  # (n, H, W, 3) uint8, RGB order

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.fps <= 0:
            raise InvalidHeaderError(f"fps must be positive, got {self.fps}")
        if self.frames.ndim != 4 or self.frames.shape[1:] != (self.height, self.width, 3):
            raise ValidationError(
                f"frames must have shape (n, {self.height}, {self.width}, 3), got {self.frames.shape}"
            )
        if self.frames.dtype != np.uint8:
            if self.frames.min(initial=0) < 0 or self.frames.max(initial=0) > 255:
                raise ValidationError("frame values must lie in [0, 255]")
            self.frames = self.frames.astype(np.uint8)

    def __len__(self):
        return self.frames.shape[0]


@dataclass
class RgbTrace:
    """Per-frame spatial means of the R, G and B channels."""

    fps: float
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.fps <= 0:
            raise InvalidTraceError(f"fps must be positive, got {self.fps}")
        if not (self.r.shape == self.g.shape == self.b.shape) or self.r.ndim != 1:
            raise InvalidTraceError("r, g, b must be 1-D sequences of equal length")
        if self.r.size < 1:
            raise InvalidTraceError("trace is empty")
        if not np.all(np.isfinite(self.matrix)):
            raise InvalidTraceError("trace contains non-finite values")

    @property
    def matrix(self):
        """3 x n matrix with rows r, g, b."""
        return np.vstack([self.r, self.g, self.b])

    @property
    def n(self):
        return self.r.size

    @property
    def duration(self):
        return self.n / self.fps

    @property
    def times(self):
        return self.t0 + np.arange(self.n) / self.fps

    def channel(self, c):
        return {"r": self.r, "g": self.g, "b": self.b}[c]

    def slice(self, start, stop):
        return RgbTrace(self.fps, self.r[start:stop], self.g[start:stop], self.b[start:stop],
                        t0=self.t0 + start / self.fps)

    def scaled(self, kr, kg, kb):
        return RgbTrace(self.fps, self.r * kr, self.g * kg, self.b * kb, t0=self.t0)


@dataclass
class ReferenceTrace:
    sample_rate: float
    spo2: np.ndarray
    hr: Optional[np.ndarray] = None
    t0: float = 0.0

    def __post_init__(self):
        self.spo2 = np.asarray(self.spo2, dtype=float)
        if self.hr is not None:
            self.hr = np.asarray(self.hr, dtype=float)
            if self.hr.shape != self.spo2.shape:
                raise InvalidTraceError("hr and spo2 must have equal length")
        if self.sample_rate <= 0:
            raise InvalidTraceError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.spo2.ndim != 1 or self.spo2.size < 1:
            raise InvalidTraceError("spo2 must be a non-empty 1-D sequence")
        if np.any(~np.isfinite(self.spo2)) or self.spo2.min() < 0 or self.spo2.max() > 100:
            raise InvalidTraceError("spo2 values must lie in [0, 100]")

    @property
    def times(self):
        return self.t0 + np.arange(self.spo2.size) / self.sample_rate

    @property
    def duration(self):
        return self.spo2.size / self.sample_rate

    def value_at(self, t):
        """Nearest-sample SpO2 at times ``t`` (clamped to the ends)."""
        idx = np.rint((np.asarray(t, dtype=float) - self.t0) * self.sample_rate).astype(int)
        return self.spo2[np.clip(idx, 0, self.spo2.size - 1)]


@dataclass
class AlignedSession:
    trace: RgbTrace
    reference: ReferenceTrace
    duration: float
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------- frames

def _header_path(path):
    path = Path(path)
    return path.with_name(path.name + HEADER_SUFFIX)


def read_header(path):
    try:
        meta = json.loads(_header_path(path).read_text())
    except FileNotFoundError as exc:
        raise InvalidHeaderError(f"missing frame header {_header_path(path)}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidHeaderError(f"unreadable frame header: {exc}") from exc
    return meta


def load_frames(path, meta=None):
    """Read a raw RGB8 frame container.

    ``path`` is the binary file of concatenated row-major H x W x 3 frames; the
    header (``width, height, fps, count, pixel_format``) is read from the JSON
    sidecar ``<path>.json`` unless given explicitly.
    """
    if meta is None:
        meta = read_header(path)
    for key in ("width", "height", "fps", "count"):
        if key not in meta:
            raise InvalidHeaderError(f"frame header lacks '{key}'")
    if meta.get("pixel_format", "rgb8") != "rgb8":
        raise InvalidHeaderError(f"unsupported pixel_format {meta['pixel_format']!r}")
    w, h, n, fps = int(meta["width"]), int(meta["height"]), int(meta["count"]), float(meta["fps"])
    if fps <= 0:
        raise InvalidHeaderError(f"fps must be positive, got {fps}")
    if w <= 0 or h <= 0 or n < 0:
        raise InvalidHeaderError("width, height must be positive and count non-negative")
    raw = Path(path).read_bytes()
    expected = n * h * w * 3
    if len(raw) != expected:
        raise CorruptInputError(
            f"{path}: expected {expected} bytes for {n} frames of {w}x{h}, found {len(raw)}"
        )
    frames = np.frombuffer(raw, dtype=np.uint8).reshape(n, h, w, 3).copy()
    return FrameSequence(width=w, height=h, fps=fps, frames=frames)


def write_frames(seq, path):
    meta = {"width": seq.width, "height": seq.height, "fps": seq.fps,
            "count": len(seq), "pixel_format": "rgb8"}
    _io.write_bytes(path, np.ascontiguousarray(seq.frames, dtype=np.uint8).tobytes())
    _io.write_text(_header_path(path), json.dumps(meta, indent=2))
    return meta


# ---------------------------------------------------------------- CSV traces

def _read_csv(path, required):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = [r for r in reader if r]
    cols = {}
    for name in header:
        j = header.index(name)
        try:
            cols[name] = np.array([float(r[j]) for r in rows], dtype=float)
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path}: bad value in column '{name}': {exc}") from None
    return cols


def _rate_from_times(t, what="trace"):
    if t.size < 2:
        raise InvalidTraceError(f"{what} needs at least two samples to infer its rate")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise InvalidTraceError(f"{what} timestamps are not strictly increasing")
    med = np.median(dt)
    if np.max(np.abs(dt - med)) > 0.01 * med:
        raise InvalidTraceError(f"{what} timestamps are not uniformly spaced within 1%")
    # the full span averages out jitter; rounding drops CSV round-off
    return float(f"{(t.size - 1) / (t[-1] - t[0]):.9g}")


def load_trace(path):
    cols = _read_csv(path, ("t", "r", "g", "b"))
    fps = _rate_from_times(cols["t"])
    return RgbTrace(fps=fps, r=cols["r"], g=cols["g"], b=cols["b"], t0=float(cols["t"][0]))


def _fmt(x):
    return repr(float(x))


def save_trace(trace, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "r", "g", "b"])
    for t, r, g, b in zip(trace.times, trace.r, trace.g, trace.b):
        w.writerow([_fmt(t), _fmt(r), _fmt(g), _fmt(b)])
    _io.write_text(path, buf.getvalue())


def load_reference(path):
    cols = _read_csv(path, ("t", "spo2"))
    rate = _rate_from_times(cols["t"], "reference")
    return ReferenceTrace(sample_rate=rate, spo2=cols["spo2"], hr=cols.get("hr"),
                          t0=float(cols["t"][0]))


def save_reference(ref, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "spo2"] + (["hr"] if ref.hr is not None else []))
    for i, t in enumerate(ref.times):
        row = [_fmt(t), _fmt(ref.spo2[i])]
        if ref.hr is not None:
            row.append(_fmt(ref.hr[i]))
        w.writerow(row)
    _io.write_text(path, buf.getvalue())


# ---------------------------------------------------------------- alignment

def resample_reference(ref, rate=1.0):
    """Nearest-neighbour resampling onto a ``rate`` Hz grid starting at ``ref.t0``."""
    n = max(1, int(np.floor(ref.duration * rate + 1e-9)))
    t = ref.t0 + np.arange(n) / rate
    hr = None
    if ref.hr is not None:
        idx = np.clip(np.rint((t - ref.t0) * ref.sample_rate).astype(int), 0, ref.spo2.size - 1)
        hr = ref.hr[idx]
    return ReferenceTrace(sample_rate=rate, spo2=ref.value_at(t), hr=hr, t0=ref.t0)


def align(trace, ref, video_lead=0.0, oximeter_delay=OXIMETER_DELAY):
    """Put video and oximeter on one clock.

    Video time zero is the start of recording; the oximeter starts
    ``video_lead`` seconds later.  The lead is dropped from the trace, and the
    reference is moved ``oximeter_delay`` seconds earlier because the oximeter
    reports late.  Reference readings are held until the next reading, so a
    reference of n samples covers ``n / rate`` seconds.  Both signals are cut
    to their overlap, which starts at t = 0 on the new clock.
    """
    if video_lead < 0 or oximeter_delay < 0:
        raise ValidationError("video_lead and oximeter_delay must be non-negative")
    if trace.duration <= video_lead:
        raise EmptySessionError(
            f"trace lasts {trace.duration:.3f} s, not longer than the {video_lead} s video lead"
        )
    # on the oximeter clock the trace spans [trace_start, trace_end) and the
    # reference [ref_start, ref_end); negative times predate the oximeter
    trace_start = trace.t0 - video_lead
    trace_end = trace_start + trace.duration
    ref_start = ref.t0 - oximeter_delay
    ref_end = ref_start + ref.duration
    start = max(0.0, trace_start, ref_start)
    span = min(trace_end, ref_end) - start
    if span <= 0:
        raise EmptySessionError("video and reference do not overlap")
    n_trace = int(np.floor(span * trace.fps + 1e-9))
    n_ref = int(np.floor(span * ref.sample_rate + 1e-9))
    if n_trace < 1 or n_ref < 1:
        raise EmptySessionError("overlap is shorter than one sample")
    a = int(round((start - trace_start) * trace.fps))
    new_trace = RgbTrace(trace.fps, trace.r[a:a + n_trace], trace.g[a:a + n_trace],
                         trace.b[a:a + n_trace], t0=start)
    t_new = start + np.arange(n_ref) / ref.sample_rate
    idx = np.floor((t_new - ref_start) * ref.sample_rate + 1e-9).astype(int)
    idx = np.clip(idx, 0, ref.spo2.size - 1)
    hr = None if ref.hr is None else ref.hr[idx]
    new_ref = ReferenceTrace(ref.sample_rate, ref.spo2[idx], hr=hr, t0=start)
    return AlignedSession(trace=new_trace, reference=new_ref, duration=span)


def realign(session, video_lead=0.0, oximeter_delay=0.0):
    return align(session.trace, session.reference, video_lead, oximeter_delay)


def stack_traces(traces: List[RgbTrace]):
    return np.stack([t.matrix for t in traces])
