"""Procedural digit-like glyphs with exact foreground masks.

Each class is a polyline template on the unit square. Every rendered
instance gets its own random affine jitter, per-vertex wobble and stroke
width, and is drawn at 4x resolution then box-downsampled and binarised,
so the foreground mask is exactly the set of non-zero pixels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from .classifier import LabeledImageSet
from .errors import ConfigError

__all__ = ["GlyphSeedConfig", "render_seed", "TEMPLATES"]

_SUPERSAMPLE = 4


def _ellipse(n=16):
    t = np.linspace(0.0, 2 * np.pi, n + 1)
    return [(0.5 + 0.3 * np.sin(a), 0.5 - 0.4 * np.cos(a)) for a in t]


TEMPLATES = [
    [_ellipse()],
    [[(0.35, 0.25), (0.55, 0.1), (0.55, 0.9)]],
    [[(0.2, 0.25), (0.5, 0.1), (0.8, 0.25), (0.2, 0.9), (0.8, 0.9)]],
    [[(0.2, 0.1), (0.8, 0.1), (0.45, 0.45), (0.8, 0.65), (0.6, 0.9), (0.2, 0.85)]],
    [[(0.65, 0.9), (0.65, 0.1), (0.15, 0.65), (0.85, 0.65)]],
    [[(0.8, 0.1), (0.25, 0.1), (0.2, 0.45), (0.7, 0.45), (0.8, 0.7), (0.6, 0.9), (0.2, 0.9)]],
    [[(0.7, 0.1), (0.3, 0.4), (0.2, 0.75), (0.5, 0.9), (0.8, 0.75), (0.7, 0.5), (0.25, 0.55)]],
    [[(0.2, 0.1), (0.8, 0.1), (0.4, 0.9)]],
    [[(0.5, 0.5), (0.2, 0.3), (0.5, 0.1), (0.8, 0.3), (0.5, 0.5),
      (0.2, 0.7), (0.5, 0.9), (0.8, 0.7), (0.5, 0.5)]],
    [[(0.75, 0.45), (0.3, 0.45), (0.25, 0.2), (0.5, 0.1), (0.75, 0.2), (0.75, 0.45), (0.65, 0.9)]],
]


@dataclass(frozen=True)
class GlyphSeedConfig:
    n_classes: int = 10
    per_class: int = 50
    height: int = 28
    width: int = 28
    thickness: tuple = (1.8, 3.2)
    scale: tuple = (0.8, 1.0)
    max_rotation_deg: float = 10.0
    max_shift: float = 0.12
    vertex_jitter: float = 0.04
    seed: int = 0

    def validate(self) -> None:
        if not 2 <= self.n_classes <= len(TEMPLATES):
            raise ConfigError(f"n_classes must be in [2, {len(TEMPLATES)}], got {self.n_classes}")
        if self.height < 16 or self.width < 16:
            raise ConfigError("glyph rasters must be at least 16 x 16")
        if self.per_class < 1:
            raise ConfigError("per_class must be positive")
        lo, hi = self.thickness
        if not 0 < lo <= hi:
            raise ConfigError("thickness range must satisfy 0 < lo <= hi")


def _render_one(strokes, rng: np.random.Generator, cfg: GlyphSeedConfig) -> np.ndarray:
    h, w = cfg.height, cfg.width
    big_h, big_w = h * _SUPERSAMPLE, w * _SUPERSAMPLE
    scale = rng.uniform(*cfg.scale)
    angle = np.deg2rad(rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg))
    shift = rng.uniform(-cfg.max_shift, cfg.max_shift, size=2)
    width_px = rng.uniform(*cfg.thickness) * _SUPERSAMPLE
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]]) * scale

    canvas = Image.new("L", (big_w, big_h), 0)
    draw = ImageDraw.Draw(canvas)
    for stroke in strokes:
        pts = np.asarray(stroke, dtype=np.float64)
        pts = pts + rng.uniform(-cfg.vertex_jitter, cfg.vertex_jitter, size=pts.shape)
        pts = (pts - 0.5) @ rot.T + 0.5 + shift
        # glyph occupies the central 80% of the raster
        xy = [(float(x * 0.8 * big_w + 0.1 * big_w), float(y * 0.8 * big_h + 0.1 * big_h)) for x, y in pts]
        draw.line(xy, fill=255, width=max(1, int(round(width_px))), joint="curve")
    big = np.asarray(canvas, dtype=np.float64) / 255.0
    coverage = big.reshape(h, _SUPERSAMPLE, w, _SUPERSAMPLE).mean(axis=(1, 3))
    return (coverage >= 0.5).astype(np.float64)


def render_seed(config: GlyphSeedConfig) -> tuple[LabeledImageSet, np.ndarray]:
    """Render a class-balanced glyph set.

    Returns the RGB image set (grey glyphs replicated to three channels,
    white strokes on black) and the (M, H, W) binary foreground masks.
    Labels cycle through the classes so any prefix is near-balanced.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    labels = np.tile(np.arange(config.n_classes), config.per_class)
    gray = np.stack([_render_one(TEMPLATES[k], rng, config) for k in labels])
    masks = gray > 0
    images = np.repeat(gray[..., None], 3, axis=-1)
    return LabeledImageSet(images, labels, config.n_classes), masks.astype(np.float64)
