"""Beer-Lambert forward model of a camera watching skin, with ground truth.

A scene fixes the light spectrum, the three channel responsivities, the
extinction curves and the path lengths.  The camera response of channel c is

    S_c = integral I(l) exp(-mu(l)) r_c(l) dl,
    mu  = eps_t C_t l_t + (eps_Hb C_Hb + eps_HbO2 C_HbO2) l(t),

evaluated with trapezoidal quadrature on the scene's wavelength grid.  The
arterial path l(t) swings between l0 and l0 + dl once per heartbeat.
"""

import csv
import io
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from . import _io
from .errors import InvalidGeometryError, InvalidSceneError, ValidationError
from .ingest import FrameSequence, ReferenceTrace, RgbTrace
from .dsp import Spectrogram

CHANNELS = ("r", "g", "b")
#: Band limits (nm) used for the red/blue extinction-contrast check.
RED_BAND = (590.0, 650.0)
BLUE_BAND = (450.0, 500.0)
BLUR_PRESETS = {"blur_sigma1.1": (1.1, 5), "blur_sigma2.6": (2.6, 15)}
TARGET_LEVEL = 128.0


# ---------------------------------------------------------------- curves

def _curve(spec, grid):
    if isinstance(spec, (list, tuple)):
        arr = np.asarray(spec, dtype=float)
        if arr.shape != grid.shape:
            raise InvalidSceneError(f"curve of length {arr.size} does not match grid of {grid.size}")
        return arr
    if not isinstance(spec, dict) or len(spec) != 1:
        raise InvalidSceneError(f"cannot interpret curve spec {spec!r}")
    (kind, p), = spec.items()
    if kind == "table":
        nm = np.asarray(p["nm"], dtype=float)
        val = np.asarray(p["value"], dtype=float)
        if nm.size != val.size or nm.size < 2 or np.any(np.diff(nm) <= 0):
            raise InvalidSceneError("curve table needs increasing nm and matching values")
        return np.interp(grid, nm, val)
    if kind == "gaussian":
        sigma = p["fwhm"] / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        return p.get("scale", 1.0) * np.exp(-0.5 * ((grid - p["center"]) / sigma) ** 2)
    if kind == "power_law":
        return p.get("scale", 1.0) * (grid / p["ref_nm"]) ** p["exponent"]
    if kind == "delta":
        out = np.zeros_like(grid)
        k = int(np.argmin(np.abs(grid - p["center"])))
        out[k] = p.get("scale", 1.0) / (grid[1] - grid[0])
        return out
    if kind == "constant":
        return np.full_like(grid, float(p))
    if kind == "sum":
        return sum(_curve(s, grid) for s in p)
    raise InvalidSceneError(f"unknown curve kind {kind!r}")


@dataclass
class OptoScene:
    wavelengths: np.ndarray
    light: np.ndarray
    responsivity: np.ndarray  # (3, W), rows r, g, b
    eps_hb: np.ndarray
    eps_hbo2: np.ndarray
    eps_t: np.ndarray
    c_t: float
    l_t: float
    c_hb_total: float
    l0: float
    dl: float

    def __post_init__(self):
        w = np.asarray(self.wavelengths, dtype=float)
        self.wavelengths = w
        for name in ("light", "eps_hb", "eps_hbo2", "eps_t"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != w.shape:
                raise InvalidSceneError(f"{name} does not match the wavelength grid")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise InvalidSceneError(f"{name} must be finite and non-negative")
            setattr(self, name, arr)
        self.responsivity = np.asarray(self.responsivity, dtype=float)
        if self.responsivity.shape != (3, w.size):
            raise InvalidSceneError("responsivity must be 3 x len(wavelengths)")
        if np.any(self.responsivity < 0):
            raise InvalidSceneError("responsivities must be non-negative")
        if w.size < 2 or np.any(np.diff(w) <= 0):
            raise InvalidSceneError("wavelength grid must be increasing")
        if np.any(self.responsivity.sum(axis=1) * self.light.sum() <= 0):
            raise InvalidSceneError("every channel must see some light on the grid")
        for name in ("c_t", "l_t", "c_hb_total", "l0", "dl"):
            if getattr(self, name) < 0:
                raise InvalidSceneError(f"{name} must be non-negative")

    # absorption ---------------------------------------------------------
    def blood_extinction(self, spo2):
        """Arterial blood absorption per cm of path, shape (..., W)."""
        s = np.asarray(spo2, dtype=float)[..., None] / 100.0
        return self.c_hb_total * (s * self.eps_hbo2 + (1.0 - s) * self.eps_hb)

    @property
    def static_absorbance(self):
        return self.eps_t * self.c_t * self.l_t

    def band_contrast(self, band):
        """Mean of eps_Hb - eps_HbO2 over a wavelength band."""
        keep = (self.wavelengths >= band[0]) & (self.wavelengths <= band[1])
        if not np.any(keep):
            raise InvalidSceneError(f"band {band} lies outside the wavelength grid")
        return float(np.mean(self.eps_hb[keep] - self.eps_hbo2[keep]))

    def has_contrast(self, red_band=RED_BAND, blue_band=BLUE_BAND):
        return np.sign(self.band_contrast(red_band)) != np.sign(self.band_contrast(blue_band))

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return {
            "wavelengths": self.wavelengths.tolist(),
            "light": self.light.tolist(),
            "responsivity": {c: self.responsivity[i].tolist() for i, c in enumerate(CHANNELS)},
            "eps_hb": self.eps_hb.tolist(),
            "eps_hbo2": self.eps_hbo2.tolist(),
            "eps_t": self.eps_t.tolist(),
            "c_t": self.c_t, "l_t": self.l_t, "c_hb_total": self.c_hb_total,
            "l0": self.l0, "dl": self.dl,
        }


def scene_from_dict(d):
    try:
        if "grid" in d:
            g = d["grid"]
            grid = np.arange(g["start"], g["stop"] + 0.5 * g["step"], g["step"], dtype=float)
        else:
            grid = np.asarray(d["wavelengths"], dtype=float)
        resp = np.vstack([_curve(d["responsivity"][c], grid) for c in CHANNELS])
        scene = OptoScene(
            wavelengths=grid,
            light=_curve(d["light"], grid),
            responsivity=resp,
            eps_hb=_curve(d["eps_hb"], grid),
            eps_hbo2=_curve(d["eps_hbo2"], grid),
            eps_t=_curve(d["eps_t"], grid),
            c_t=float(d["c_t"]), l_t=float(d["l_t"]), c_hb_total=float(d["c_hb_total"]),
            l0=float(d["l0"]), dl=float(d["dl"]),
        )
    except KeyError as exc:
        raise InvalidSceneError(f"scene config lacks {exc}") from None
    return scene


def load_scene(path):
    try:
        return scene_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise InvalidSceneError(f"{path}: {exc}") from None


def default_scene_dict():
    return json.loads(resources.files("rgbspo2.data").joinpath("default_scene.json").read_text())


def default_scene():
    return scene_from_dict(default_scene_dict())


def narrowband_scene(centers=(620.0, 540.0, 460.0), base=None):
    """Default scene with delta-like responsivities at ``centers`` (nm)."""
    d = default_scene_dict() if base is None else dict(base)
    d["responsivity"] = {c: {"delta": {"center": lam}} for c, lam in zip(CHANNELS, centers)}
    return scene_from_dict(d)


# ---------------------------------------------------------------- response

def camera_response(scene, spo2, l):
    """Channel responses (S_r, S_g, S_b) for SpO2 (percent) and arterial path l (cm).

    ``spo2`` and ``l`` broadcast against each other; the result has shape
    ``(3,) + broadcast shape``.
    """
    spo2 = np.asarray(spo2, dtype=float)
    l = np.asarray(l, dtype=float)
    if np.any(spo2 < 0) or np.any(spo2 > 100):
        raise ValidationError("spo2 must lie in [0, 100]")
    shape = np.broadcast(spo2, l).shape
    s_flat = np.broadcast_to(spo2, shape).ravel()
    l_flat = np.broadcast_to(l, shape).ravel()
    mu = scene.static_absorbance + scene.blood_extinction(s_flat) * l_flat[:, None]
    integrand = scene.light * np.exp(-mu)  # (n, W)
    S = np.trapezoid(integrand[:, None, :] * scene.responsivity[None], scene.wavelengths, axis=-1)
    if np.any(S <= 0) or not np.all(np.isfinite(S)):
        raise InvalidSceneError("scene yields a non-positive camera response")
    return S.T.reshape((3,) + shape)


def narrowband_log_ratio(scene, spo2, channel):
    """log(S|l0 / S|l0+dl) for a delta-like channel: blood absorption times dl."""
    k = int(np.argmax(scene.responsivity[CHANNELS.index(channel)]))
    return scene.blood_extinction(spo2)[..., k] * scene.dl


def log_ratio(scene, spo2):
    """Per-channel log(S at diastole / S at systole), any responsivities."""
    s_min = camera_response(scene, spo2, scene.l0)
    s_max = camera_response(scene, spo2, scene.l0 + scene.dl)
    return np.log(s_min / s_max)


def ror(scene, spo2, c1="r", c2="b"):
    """Ratio of the two channels' log-ratios."""
    lr = log_ratio(scene, spo2)
    return lr[CHANNELS.index(c1)] / lr[CHANNELS.index(c2)]


def spo2_from_ror(scene, value, lam1, lam2):
    """Invert the two-wavelength ratio of ratios at wavelengths lam1, lam2 (nm)."""
    e = lambda curve, lam: float(np.interp(lam, scene.wavelengths, curve))
    hb1, hbo1 = e(scene.eps_hb, lam1), e(scene.eps_hbo2, lam1)
    hb2, hbo2 = e(scene.eps_hb, lam2), e(scene.eps_hbo2, lam2)
    return 100.0 * (hb1 - hb2 * value) / (hb1 - hbo1 + (hbo2 - hb2) * value)


# ---------------------------------------------------------------- ground truth

@dataclass
class GroundTruth:
    fps: float
    spo2: np.ndarray
    hr: np.ndarray

    def __post_init__(self):
        self.spo2 = np.asarray(self.spo2, dtype=float)
        self.hr = np.asarray(self.hr, dtype=float)
        if self.spo2.shape != self.hr.shape or self.spo2.ndim != 1:
            raise ValidationError("spo2 and hr must be 1-D and equally long")
        if self.spo2.min() < 70 or self.spo2.max() > 100:
            raise ValidationError("ground-truth SpO2 must stay in [70, 100]")
        if self.hr.min() < 42 or self.hr.max() > 180:
            raise ValidationError("ground-truth HR must stay in [42, 180] bpm")

    @property
    def duration(self):
        return self.spo2.size / self.fps

    @property
    def times(self):
        return np.arange(self.spo2.size) / self.fps

    def to_csv(self, path):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "spo2", "hr"])
        for row in zip(self.times, self.spo2, self.hr):
            w.writerow([repr(float(v)) for v in row])
        _io.write_text(path, buf.getvalue())


def _cos_ramp(x):
    x = np.clip(x, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * x)


def _slow_noise(n, fps, rng, corner=0.05):
    """Unit-variance noise band-limited below ``corner`` Hz."""
    if n < 4:
        return np.zeros(n)
    spec = np.fft.rfft(rng.normal(size=n))
    f = np.fft.rfftfreq(n, 1.0 / fps)
    spec[f > corner] = 0.0
    spec[0] = 0.0
    x = np.fft.irfft(spec, n)
    sd = x.std()
    return x / sd if sd > 0 else x


def breath_hold_truth(duration, fps, n_dips=3, baseline=98.5, nadir=90.0, hr_base=72.0,
                      hr_drift=0.0, hr_covary=0.0, hr_wander=1.0, rng=None):
    """SpO2 with ``n_dips`` breath-hold dips made of cosine ramps.

    Each cycle holds the baseline, falls to the nadir, and recovers.
    ``nadir`` and ``baseline`` may be (lo, hi) tuples to draw per-dip values.
    HR starts at ``hr_base``, drifts linearly by ``hr_drift`` bpm over the
    session, rises by ``hr_covary`` bpm per percent of desaturation, and
    wanders slowly with standard deviation ``hr_wander``.
    """
    rng = np.random.default_rng() if rng is None else rng
    n = int(round(duration * fps))
    t = np.arange(n) / fps
    draw = lambda v: rng.uniform(*v) if isinstance(v, tuple) else float(v)
    base = draw(baseline)
    spo2 = np.full(n, base)
    cycle = duration / n_dips
    for k in range(n_dips):
        start = k * cycle + cycle * rng.uniform(0.12, 0.22)
        fall = cycle * rng.uniform(0.30, 0.38)
        hold = cycle * rng.uniform(0.02, 0.06)
        rise = cycle * rng.uniform(0.22, 0.30)
        depth = base - draw(nadir)
        down = _cos_ramp((t - start) / fall)
        up = _cos_ramp((t - start - fall - hold) / rise)
        spo2 = spo2 - depth * down * (1.0 - up)
    hr = (hr_base + hr_drift * t / max(duration, 1e-9) + hr_covary * (base - spo2)
          + hr_wander * _slow_noise(n, fps, rng, 0.03))
    return GroundTruth(fps=fps, spo2=np.clip(spo2, 70, 100), hr=np.clip(hr, 42, 180))


def constant_truth(duration, fps, spo2=97.0, hr=72.0):
    n = int(round(duration * fps))
    return GroundTruth(fps=fps, spo2=np.full(n, float(spo2)), hr=np.full(n, float(hr)))


def ramp_truth(duration, fps, start=99.0, stop=89.0, hr=72.0):
    n = int(round(duration * fps))
    return GroundTruth(fps=fps, spo2=np.linspace(start, stop, n), hr=np.full(n, float(hr)))


# ---------------------------------------------------------------- traces

@dataclass
class Artifacts:
    """Nuisance effects layered on top of the Beer-Lambert response.

    perfusion: relative slow variation of the pulsatile path dl.
    motion: upper bound of a wavelength-flat, pulse-synchronous attenuation
        swing; it adds the same amount to every channel's AC/DC.
    interferer_offset / interferer_amp / interferer_coupling: a flickering
        illumination component at HR + offset Hz whose relative amplitude in
        channel c is amp * coupling[c], with slowly varying strength.
    quantize: round the trace to integer counts.
    """

    perfusion: float = 0.0
    motion: float = 0.0
    interferer_offset: float = 0.0
    interferer_amp: float = 0.0
    interferer_coupling: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    quantize: bool = False


def pulse_phase(truth, phase0=0.0):
    return phase0 + 2.0 * np.pi * np.cumsum(truth.hr / 60.0) / truth.fps


def channel_gain(scene, level=TARGET_LEVEL):
    """Common gain putting the mid-pulse response at ``level`` counts on average."""
    S = camera_response(scene, 97.0, scene.l0 + 0.5 * scene.dl)
    return level / float(np.mean(S))


def generate_trace(scene, truth, noise_snr_db=None, artifacts=None, rng=None, phase0=None,
                   gain=None):
    """Sample the camera response on the ground-truth time grid.

    The pulsatile path follows l(t) = l0 + dl (1 + sin(phase(t))) / 2, with
    phase(t) the running integral of the HR.  All channels share one gain so
    the average level is about 128 counts.  ``noise_snr_db`` adds white noise
    per channel at that ratio to the channel's pulsatile power.
    """
    rng = np.random.default_rng() if rng is None else rng
    art = artifacts or Artifacts()
    n = truth.spo2.size
    phase = pulse_phase(truth, rng.uniform(0, 2 * np.pi) if phase0 is None else phase0)
    swing = 0.5 * (1.0 + np.sin(phase))
    dl = scene.dl * np.ones(n)
    if art.perfusion:
        dl = dl * (1.0 + art.perfusion * np.tanh(_slow_noise(n, truth.fps, rng, 0.02)))
    S = camera_response(scene, truth.spo2, scene.l0 + dl * swing)
    S_mid = camera_response(scene, truth.spo2, scene.l0 + 0.5 * dl)
    if art.motion:
        m = art.motion * (0.5 + 0.5 * np.tanh(_slow_noise(n, truth.fps, rng, 0.03)))
        S = S * np.exp(-m * (swing - 0.5))
    if art.interferer_amp:
        f_int = truth.hr / 60.0 + art.interferer_offset
        ph = rng.uniform(0, 2 * np.pi) + 2.0 * np.pi * np.cumsum(f_int) / truth.fps
        strength = art.interferer_amp * (0.5 + 0.5 * np.tanh(_slow_noise(n, truth.fps, rng, 0.03)))
        coupling = np.asarray(art.interferer_coupling, dtype=float)[:, None]
        S = S * (1.0 + coupling * strength * np.sin(ph))
    k = channel_gain(scene) if gain is None else gain
    S = S * k
    if noise_snr_db is not None:
        pulsatile = S - S_mid * k
        sd = np.sqrt(np.mean(pulsatile ** 2, axis=1) / 10.0 ** (noise_snr_db / 10.0))
        S = S + sd[:, None] * rng.normal(size=S.shape)
    if art.quantize:
        S = np.clip(np.rint(S), 0, 255)
    return RgbTrace(fps=truth.fps, r=S[0], g=S[1], b=S[2]), truth


def reference_from_truth(truth, rate=1.0, delay=1.8, lead=0.0, quantize=True):
    """Oximeter readings on the oximeter clock.

    The oximeter starts ``lead`` seconds into the video and runs to its end;
    the reading taken at oximeter time tau reports the SpO2 of time
    ``lead + tau - delay`` on the video clock.
    """
    n = int(np.floor((truth.duration - lead) * rate + 1e-9))
    if n < 1:
        raise ValidationError("lead leaves no reference samples")
    t_video = lead + np.arange(n) / rate - delay
    idx = np.clip(np.rint(t_video * truth.fps).astype(int), 0, truth.spo2.size - 1)
    spo2 = truth.spo2[idx]
    hr = truth.hr[idx]
    if quantize:
        spo2 = np.rint(spo2)
        hr = np.rint(hr)
    return ReferenceTrace(sample_rate=rate, spo2=spo2, hr=hr)


# ---------------------------------------------------------------- cohorts

def participant_scene(rng, base=None):
    """A participant-specific scene: jittered tissue, blood and path parameters."""
    d = default_scene_dict() if base is None else dict(base)
    d["c_t"] = d["c_t"] * rng.uniform(0.6, 1.5)
    d["l0"] = d["l0"] * rng.uniform(0.6, 1.5)
    d["c_hb_total"] = d["c_hb_total"] * rng.uniform(0.85, 1.15)
    d["dl"] = d["dl"] * rng.uniform(0.7, 1.4)
    d["eps_t"] = {"power_law": {"ref_nm": 500, "exponent": rng.uniform(-3.6, -2.4),
                                "scale": 1000.0}}
    return scene_from_dict(d)


def session_scene(scene, rng, jitter=0.05):
    """Small day-to-day changes of one participant's scene."""
    f = lambda: 1.0 + jitter * rng.uniform(-1, 1)
    return scene.with_(dl=scene.dl * f(), l0=scene.l0 * f(), c_t=scene.c_t * f())


# ---------------------------------------------------------------- frames

@dataclass(frozen=True)
class HandGeometry:
    """Ellipse given as fractions of the frame size."""

    cx: float = 0.5
    cy: float = 0.5
    ax: float = 0.32
    ay: float = 0.36

    def mask(self, width, height):
        if self.ax <= 0 or self.ay <= 0:
            raise InvalidGeometryError("hand ellipse has zero size")
        if (self.cx - self.ax < 0 or self.cx + self.ax > 1 or self.cy - self.ay < 0
                or self.cy + self.ay > 1):
            raise InvalidGeometryError("hand ellipse extends outside the frame")
        yy, xx = np.mgrid[0:height, 0:width]
        u = (xx + 0.5 - self.cx * width) / (self.ax * width)
        v = (yy + 0.5 - self.cy * height) / (self.ay * height)
        m = u * u + v * v <= 1.0
        if not m.any():
            raise InvalidGeometryError("hand ellipse covers no pixel")
        return m


def render_frames(trace, width=80, height=60, hand_geometry=HandGeometry(),
                  background=(18, 16, 20), texture_sigma=2.0, rng=None, shading=0.0,
                  skin_texture=0.0):
    """Dark background with an elliptical hand carrying the trace colour plus pixel noise.

    ``shading`` > 0 darkens the hand smoothly towards its rim (static, down
    to ``1 - shading`` at the edge) so pixel values spread over a range of
    levels, as on a real, curved hand.  Shading scales all channels alike,
    so the recovered trace is the input times the mean shade.
    ``skin_texture`` is the standard deviation (counts) of a static per-pixel
    pattern, fixed over time, unlike the per-frame ``texture_sigma`` noise.
    """
    rng = np.random.default_rng() if rng is None else rng
    if shading < 0 or shading >= 1:
        raise ValidationError("shading must lie in [0, 1)")
    mask = hand_geometry.mask(width, height)
    yy, xx = np.mgrid[0:height, 0:width]
    u = (xx + 0.5 - hand_geometry.cx * width) / (hand_geometry.ax * width)
    v = (yy + 0.5 - hand_geometry.cy * height) / (hand_geometry.ay * height)
    rho2 = (u * u + v * v)[mask]
    shade = 1.0 - shading * rho2
    static = skin_texture * rng.normal(size=(rho2.size, 3)) if skin_texture else 0.0
    n = trace.n
    frames = np.empty((n, height, width, 3), dtype=np.uint8)
    bg = np.asarray(background, dtype=float)
    colour = trace.matrix.T  # (n, 3)
    npx = int(mask.sum())
    for i in range(n):
        f = np.empty((height, width, 3))
        f[:] = bg
        f[mask] = shade[:, None] * colour[i] + static + texture_sigma * rng.normal(size=(npx, 3))
        frames[i] = np.clip(np.rint(f), 0, 255).astype(np.uint8)
    return FrameSequence(width=width, height=height, fps=trace.fps, frames=frames)


@dataclass(frozen=True)
class BlurKernel:
    sigma: float
    support: int
    weights: np.ndarray

    @property
    def separable(self):
        """1-D factor whose outer product is ``weights``."""
        c = self.weights[self.support // 2]
        return c / np.sqrt(c[self.support // 2])


def gaussian_kernel(sigma, support):
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    if support < 1 or support % 2 == 0:
        raise ValidationError("support must be a positive odd integer")
    r = np.arange(support) - support // 2
    w = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma ** 2))
    return BlurKernel(sigma=float(sigma), support=int(support), weights=w / w.sum())


def gaussian_blur(seq, sigma, support, chunk=256):
    """Convolve every frame with a truncated, normalised Gaussian (replicate borders)."""
    k = gaussian_kernel(sigma, support).separable
    out = np.empty_like(seq.frames, dtype=np.uint8)
    for a in range(0, len(seq.frames), chunk):
        data = seq.frames[a:a + chunk].astype(float)
        data = ndimage.correlate1d(data, k, axis=1, mode="nearest")
        data = ndimage.correlate1d(data, k, axis=2, mode="nearest")
        out[a:a + chunk] = np.clip(np.rint(data), 0, 255)
    return FrameSequence(width=seq.width, height=seq.height, fps=seq.fps, frames=out)


# ---------------------------------------------------------------- spectrograms

def hr_spectrogram(rng, n_cols=120, hop=1.0, band=(0.7, 3.0), df=0.01, hr_start=None,
                   hr_drift=None, ridge_width=0.05, floor=0.02, outlier_rate=0.15,
                   outlier_amp=(1.3, 2.5)):
    """Magnitude spectrogram of a drifting pulse with impulsive outlier columns.

    The pulse is a Gaussian ridge of unit height and ``ridge_width`` Hz along
    an HR that moves linearly by ``hr_drift`` bpm plus slow wander.  A
    fraction ``outlier_rate`` of the columns carries a one-bin spike taller
    than the ridge at a random frequency; the floor is Rayleigh distributed.
    Returns the spectrogram and the true HR (bpm) per column.
    """
    freqs = np.arange(band[0], band[1] + df / 2, df)
    times = hop * (np.arange(n_cols) + 0.5)
    hr0 = rng.uniform(60, 90) if hr_start is None else hr_start
    drift = rng.uniform(-20, 20) if hr_drift is None else hr_drift
    bpm = hr0 + drift * np.arange(n_cols) / max(n_cols - 1, 1) + 2.0 * _slow_noise(n_cols, 1 / hop, rng, 0.05)
    f0 = bpm / 60.0
    M = np.exp(-0.5 * ((freqs[:, None] - f0[None, :]) / ridge_width) ** 2)
    M = M + floor * rng.rayleigh(size=M.shape)
    bad = np.flatnonzero(rng.random(n_cols) < outlier_rate)
    for j in bad:
        far = np.flatnonzero(np.abs(freqs - f0[j]) > 0.3)
        M[rng.choice(far), j] += rng.uniform(*outlier_amp)
    return Spectrogram(M, freqs, times, window=10.0, hop=hop), bpm
