"""Background corpora: bundled procedural textures or a PNG directory."""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError

__all__ = ["procedural_textures", "load_png_dir", "corpus_hash", "build_corpus"]

TEXTURE_KINDS = ("noise", "blobs", "gradient", "stripes", "checker")


def _smooth_noise(rng, size, cells):
    coarse = rng.random((cells + 1, cells + 1))
    t = np.linspace(0, cells, size)
    i0 = np.minimum(t.astype(int), cells - 1)
    f = t - i0
    rows = coarse[i0] * (1 - f)[:, None] + coarse[i0 + 1] * f[:, None]
    return rows[:, i0] * (1 - f)[None, :] + rows[:, i0 + 1] * f[None, :]


def _texture(rng: np.random.Generator, kind: str, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / float(size)
    if kind == "noise":
        base = rng.random((size, size))
    elif kind == "blobs":
        base = _smooth_noise(rng, size, int(rng.integers(3, 9)))
    elif kind == "gradient":
        a = rng.uniform(0, 2 * np.pi)
        base = np.cos(a) * xx + np.sin(a) * yy
    elif kind == "stripes":
        a = rng.uniform(0, np.pi)
        freq = rng.uniform(2, 10)
        base = 0.5 + 0.5 * np.sin(2 * np.pi * freq * (np.cos(a) * xx + np.sin(a) * yy))
    else:
        cells = int(rng.integers(2, 9))
        base = ((np.floor(xx * cells) + np.floor(yy * cells)) % 2).astype(np.float64)
    base = (base - base.min()) / max(base.max() - base.min(), 1e-12)

    # random brightness band and tint so the corpus spans dark to saturated
    hi = rng.uniform(0.05, 1.0)
    lo = rng.uniform(0.0, hi)
    tint = rng.uniform(0.3, 1.0, size=3)
    tint /= tint.max()
    img = (lo + (hi - lo) * base)[..., None] * tint
    return np.clip(img, 0.0, 1.0)


def procedural_textures(count: int = 32, size: int = 64, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [_texture(rng, TEXTURE_KINDS[i % len(TEXTURE_KINDS)], size) for i in range(count)]


def load_png_dir(path) -> list:
    path = Path(path)
    if not path.is_dir():
        raise ConfigError(f"background directory {path} does not exist")
    images = []
    for f in sorted(path.glob("*.png")):
        with Image.open(f) as im:
            images.append(np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0)
    return images


def build_corpus(directory=None, procedural: bool = True, count: int = 32, size: int = 64, seed: int = 0) -> list:
    corpus = procedural_textures(count, size, seed) if procedural else []
    if directory:
        corpus.extend(load_png_dir(directory))
    if not corpus:
        raise ConfigError("background corpus is empty")
    return corpus


def corpus_hash(corpus: list) -> str:
    h = hashlib.sha256()
    for img in corpus:
        a = np.ascontiguousarray(img, dtype="<f8")
        h.update(repr(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
