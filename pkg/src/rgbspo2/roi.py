"""Skin ROI: Cr-channel Otsu threshold, morphological cleanup, spatial averaging."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from . import _io
from .errors import DegenerateHistogramError, InsufficientSkinError, ValidationError
from .ingest import RgbTrace


@dataclass(frozen=True)
class RoiConfig:
    #: (x0, y0, x1, y1) pixel box, end-exclusive; None means the whole frame.
    rect: Optional[Tuple[int, int, int, int]] = None
    morph_radius: int = 2
    median_window: int = 7
    min_coverage: float = 0.01
    #: skin is Cr above the threshold (dark background); False flips it.
    skin_above: bool = True
    static_mask: bool = False

    def __post_init__(self):
        if self.morph_radius < 0:
            raise ValidationError("morph_radius must be >= 0")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValidationError("median_window must be an odd integer >= 1")
        if not 0 <= self.min_coverage <= 1:
            raise ValidationError("min_coverage must lie in [0, 1]")

    def box(self, width, height):
        if self.rect is None:
            return 0, 0, width, height
        x0, y0, x1, y1 = self.rect
        if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
            raise ValidationError(f"rectangle {self.rect} is not inside a {width}x{height} frame")
        return x0, y0, x1, y1


@dataclass
class SkinMask:
    mask: np.ndarray
    threshold: int = -1

    @property
    def height(self):
        return self.mask.shape[0]

    @property
    def width(self):
        return self.mask.shape[1]

    @property
    def coverage(self):
        return float(self.mask.mean())

    def to_pgm(self, path):
        h, w = self.mask.shape
        data = np.where(self.mask, 255, 0).astype(np.uint8).tobytes()
        _io.write_bytes(path, f"P5\n{w} {h}\n255\n".encode() + data)


def rgb_to_cr(frame):
    """Full-range BT.601 Cr, clamped to [0, 255]."""
    f = np.asarray(frame, dtype=float)
    cr = 128.0 + 0.5 * f[..., 0] - 0.418688 * f[..., 1] - 0.081312 * f[..., 2]
    return np.clip(cr, 0.0, 255.0)


def otsu_threshold(hist):
    """Threshold t maximising between-class variance of {<= t} vs {> t}.

    Ties go to the smallest t.
    """
    h = np.asarray(hist, dtype=float)
    if h.shape != (256,) or np.any(h < 0):
        raise ValidationError("histogram must have 256 non-negative bins")
    total = h.sum()
    if total <= 0:
        raise DegenerateHistogramError("histogram is empty")
    if np.count_nonzero(h) < 2:
        raise DegenerateHistogramError("histogram has a single value; no threshold separates it")
    levels = np.arange(256, dtype=float)
    n0 = np.cumsum(h)[:-1]
    s0 = np.cumsum(h * levels)[:-1]
    n1 = total - n0
    s_all = float((h * levels).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (total * s0 - n0 * s_all) ** 2 / (n0 * n1)
    between[(n0 == 0) | (n1 == 0)] = 0.0
    best = between.max()
    return int(np.flatnonzero(between >= best * (1.0 - 1e-12))[0])


def _disk(radius):
    r = np.arange(-radius, radius + 1)
    return r[:, None] ** 2 + r[None, :] ** 2 <= radius * radius


def skin_mask(frame, cfg=RoiConfig()):
    """Otsu on Cr inside the box, then erosion, dilation and a median filter."""
    frame = np.asarray(frame)
    h, w = frame.shape[:2]
    x0, y0, x1, y1 = cfg.box(w, h)
    cr = rgb_to_cr(frame[y0:y1, x0:x1])
    hist = np.bincount(np.rint(cr).astype(int).ravel(), minlength=256)
    try:
        t = otsu_threshold(hist)
    except DegenerateHistogramError as exc:
        raise InsufficientSkinError(f"no skin found: {exc}") from None
    m = cr > t if cfg.skin_above else cr <= t
    if cfg.morph_radius > 0:
        se = _disk(cfg.morph_radius)
        m = ndimage.binary_erosion(m, structure=se)
        m = ndimage.binary_dilation(m, structure=se)
    if cfg.median_window > 1:
        m = ndimage.median_filter(m.astype(np.uint8), size=cfg.median_window, mode="constant") > 0
    full = np.zeros((h, w), dtype=bool)
    full[y0:y1, x0:x1] = m
    out = SkinMask(mask=full, threshold=t)
    if out.coverage < cfg.min_coverage or not full.any():
        raise InsufficientSkinError(
            f"skin coverage {out.coverage:.4f} below minimum {cfg.min_coverage}"
        )
    return out


def spatial_average(seq, masks):
    """Per-frame mean of R, G, B over the mask.

    ``masks`` is a sequence with one SkinMask per frame, or a single SkinMask
    reused for every frame.
    """
    frames = seq.frames
    n = frames.shape[0]
    if isinstance(masks, SkinMask):
        masks = [masks] * n
    if len(masks) != n:
        raise ValidationError(f"{len(masks)} masks for {n} frames")
    out = np.empty((n, 3))
    for i, (f, m) in enumerate(zip(frames, masks)):
        if m.mask.shape != f.shape[:2]:
            raise ValidationError(f"mask {i} does not match the frame size")
        cnt = np.count_nonzero(m.mask)
        if cnt == 0:
            raise InsufficientSkinError(f"empty mask at frame {i}", frame_index=i)
        out[i] = f[m.mask].sum(axis=0, dtype=np.float64) / cnt
    return RgbTrace(fps=seq.fps, r=out[:, 0], g=out[:, 1], b=out[:, 2])


def extract_trace(seq, cfg=RoiConfig(), map_fn=map):
    """Mask every frame (or only frame 0 with ``static_mask``) and average."""
    if len(seq) == 0:
        raise InsufficientSkinError("no frames")
    if cfg.static_mask:
        masks = skin_mask(seq.frames[0], cfg)
    else:
        masks = []
        for i, m in enumerate(map_fn(lambda f: _mask_or_index(f, cfg), seq.frames)):
            if isinstance(m, InsufficientSkinError):
                raise InsufficientSkinError(f"frame {i}: {m}", frame_index=i)
            masks.append(m)
    return spatial_average(seq, masks)


def _mask_or_index(frame, cfg):
    try:
        return skin_mask(frame, cfg)
    except InsufficientSkinError as exc:
        return exc
