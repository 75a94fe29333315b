"""Batched float image operations on (M, H, W, C) arrays in [0, 1].

Every parametrised op takes one magnitude per image. Photometric ops
follow the PIL ``ImageEnhance`` blend definitions; geometric ops use a
shared bilinear inverse-affine warp with zero fill.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "CATALOG",
    "HELD_OUT_CATALOG",
    "warp_affine",
    "crop_resize",
    "auto_contrast",
    "rotate",
    "color",
    "brightness",
    "sharpness",
    "translate",
    "cutout",
    "shear",
    "equalize",
    "color_temperature",
]

# (lo, hi) bounds of the per-image magnitude; None marks parameterless ops.
CATALOG = {
    "autoContrast": None,
    "rotation": (-30.0, 30.0),      # degrees
    "color": (0.4, 1.6),            # saturation blend factor
    "brightness": (0.4, 1.6),
    "sharpness": (0.4, 1.6),
    "translation": (-0.2, 0.2),     # fraction of side, drawn per axis
}

# Never used for meta-set synthesis; robustness tests only.
HELD_OUT_CATALOG = {
    "cutout": (0.10, 0.25),         # square side as fraction of image side
    "shear": (-0.3, 0.3),
    "equalize": None,
    "colorTemperature": (0.7, 1.3),
}

_LUMA = np.array([0.299, 0.587, 0.114])
_SMOOTH = np.array([[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]]) / 13.0


def warp_affine(src: np.ndarray, inverse: np.ndarray, out_hw: tuple | None = None) -> np.ndarray:
    """Bilinear warp with an inverse map from output to source pixel coords.

    ``src`` is (M or 1, Hs, Ws, C); ``inverse`` is (M, 2, 3) acting on
    ``(x, y, 1)`` pixel-centre coordinates. Samples outside the source
    contribute zero.
    """
    m = inverse.shape[0]
    hs, ws, c = src.shape[1:]
    h, w = out_hw if out_hw is not None else (hs, ws)
    ys, xs = np.mgrid[0:h, 0:w]
    grid = np.stack([xs.ravel(), ys.ravel(), np.ones(h * w)], axis=0).astype(np.float64)
    coords = inverse @ grid  # (M, 2, HW)
    sx, sy = coords[:, 0], coords[:, 1]
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    flat = np.ascontiguousarray(src).reshape(-1, c)
    base = 0 if src.shape[0] == 1 else (np.arange(m) * (hs * ws))[:, None]
    out = np.zeros((m, h * w, c))
    for dy, dx, wgt in ((0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)),
                        (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
        xi = x0 + dx
        yi = y0 + dy
        valid = (xi >= 0) & (xi < ws) & (yi >= 0) & (yi < hs) & (wgt > 0)
        idx = base + np.where(valid, yi * ws + xi, 0)
        out += np.where(valid, wgt, 0.0)[..., None] * flat[idx]
    return out.reshape(m, h, w, c)


def _centered(mats: np.ndarray, h: int, w: int) -> np.ndarray:
    """Conjugate (M, 2, 2) linear maps so they act about the image centre."""
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    centre = np.array([cx, cy])
    out = np.empty((mats.shape[0], 2, 3))
    out[:, :, :2] = mats
    out[:, :, 2] = centre - mats @ centre
    return out


def crop_resize(src: np.ndarray, boxes: np.ndarray, out_hw: tuple) -> np.ndarray:
    """Resample (left, top, size) square crops of one source image."""
    h, w = out_hw
    left, top, size = boxes[:, 0], boxes[:, 1], boxes[:, 2]
    inv = np.zeros((boxes.shape[0], 2, 3))
    inv[:, 0, 0] = size / w
    inv[:, 0, 2] = left + 0.5 * size / w - 0.5
    inv[:, 1, 1] = size / h
    inv[:, 1, 2] = top + 0.5 * size / h - 0.5
    return warp_affine(src[None] if src.ndim == 3 else src, inv, (h, w))


def _per_image(mag, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(mag, dtype=np.float64), (n,))[:, None, None, None]


def auto_contrast(images: np.ndarray) -> np.ndarray:
    lo = images.min(axis=(1, 2), keepdims=True)
    hi = images.max(axis=(1, 2), keepdims=True)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (images - lo) / safe, images)


def rotate(images: np.ndarray, degrees) -> np.ndarray:
    n, h, w = images.shape[:3]
    theta = np.deg2rad(np.broadcast_to(np.asarray(degrees, dtype=np.float64), (n,)))
    c, s = np.cos(theta), np.sin(theta)
    # inverse of a counter-clockwise rotation on screen coordinates
    mats = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], axis=1)
    return warp_affine(images, _centered(mats, h, w))


def translate(images: np.ndarray, fractions) -> np.ndarray:
    """Shift by ``fractions[:, 0] * W`` right and ``fractions[:, 1] * H`` down."""
    n, h, w = images.shape[:3]
    fr = np.broadcast_to(np.asarray(fractions, dtype=np.float64), (n, 2))
    inv = np.zeros((n, 2, 3))
    inv[:, 0, 0] = 1.0
    inv[:, 1, 1] = 1.0
    inv[:, 0, 2] = -fr[:, 0] * w
    inv[:, 1, 2] = -fr[:, 1] * h
    return warp_affine(images, inv)


def shear(images: np.ndarray, amounts) -> np.ndarray:
    n, h, w = images.shape[:3]
    k = np.broadcast_to(np.asarray(amounts, dtype=np.float64), (n,))
    mats = np.zeros((n, 2, 2))
    mats[:, 0, 0] = 1.0
    mats[:, 0, 1] = -k
    mats[:, 1, 1] = 1.0
    return warp_affine(images, _centered(mats, h, w))


def _blend(degenerate: np.ndarray, images: np.ndarray, factor) -> np.ndarray:
    f = _per_image(factor, images.shape[0])
    return np.clip(degenerate + f * (images - degenerate), 0.0, 1.0)


def brightness(images: np.ndarray, factor) -> np.ndarray:
    return _blend(np.zeros_like(images), images, factor)


def color(images: np.ndarray, factor) -> np.ndarray:
    gray = (images @ _LUMA)[..., None]
    return _blend(np.broadcast_to(gray, images.shape), images, factor)


def sharpness(images: np.ndarray, factor) -> np.ndarray:
    h, w = images.shape[1:3]
    padded = np.pad(images, ((0, 0), (1, 1), (1, 1), (0, 0)), mode="edge")
    smooth = np.zeros_like(images)
    for dy in range(3):
        for dx in range(3):
            smooth += _SMOOTH[dy, dx] * padded[:, dy : dy + h, dx : dx + w]
    # border pixels are left untouched, as in PIL
    smooth[:, 0] = images[:, 0]
    smooth[:, -1] = images[:, -1]
    smooth[:, :, 0] = images[:, :, 0]
    smooth[:, :, -1] = images[:, :, -1]
    return _blend(smooth, images, factor)


def cutout(images: np.ndarray, fractions, rng: np.random.Generator, fill: float = 0.5) -> np.ndarray:
    n, h, w = images.shape[:3]
    fr = np.broadcast_to(np.asarray(fractions, dtype=np.float64), (n,))
    out = images.copy()
    for i in range(n):
        side = max(1, int(round(fr[i] * min(h, w))))
        top = int(rng.integers(0, h - side + 1))
        left = int(rng.integers(0, w - side + 1))
        out[i, top : top + side, left : left + side] = fill
    return out


def equalize(images: np.ndarray) -> np.ndarray:
    """Per-channel histogram equalisation on 256 levels (PIL algorithm)."""
    q = np.clip(np.round(images * 255.0), 0, 255).astype(np.int64)
    out = np.empty_like(images)
    n, c = images.shape[0], images.shape[3]
    for i in range(n):
        for ch in range(c):
            plane = q[i, :, :, ch]
            hist = np.bincount(plane.ravel(), minlength=256)
            nz = np.flatnonzero(hist)
            step = (hist.sum() - hist[nz[-1]]) // 255
            if step == 0:
                out[i, :, :, ch] = images[i, :, :, ch]
                continue
            lut = (np.concatenate([[0], np.cumsum(hist)[:-1]]) + step // 2) // step
            out[i, :, :, ch] = np.clip(lut, 0, 255)[plane] / 255.0
    return out


def color_temperature(images: np.ndarray, factor) -> np.ndarray:
    """Warm (factor > 1) or cool (< 1) shift: red scaled by f, blue by 1/f."""
    f = np.broadcast_to(np.asarray(factor, dtype=np.float64), (images.shape[0],))
    gains = np.stack([f, np.ones_like(f), 1.0 / f], axis=-1)[:, None, None, :]
    return np.clip(images * gains, 0.0, 1.0)
