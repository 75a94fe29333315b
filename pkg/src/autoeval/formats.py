"""Little-endian binary formats.

Feature bundle (``AEFB``)::

    magic "AEFB" | version u32 | M u64 | d u32 | K u32 | has_labels u8
    features  M*d float32
    softmax   M*K float32
    labels    M   u32        (only when has_labels == 1)

Dataset statistics (``AEST``)::

    magic "AEST" | version u32 | count u64 | d u32
    mean d float64 | cov d*d float64

Checkpoints (``AECL`` classifier, ``AELP`` linear, ``AENP`` neural) share a
layer-shape table: ``n_arrays u32`` then per array ``ndim u8, dims u64...``,
followed by every array's float64 payload in table order.
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .classifier import FeatureBundle, TinyClassifier
from .errors import FormatError, ValidationError
from .stats import DatasetStats

__all__ = [
    "write_bundle",
    "read_bundle",
    "write_stats",
    "read_stats",
    "write_classifier",
    "read_classifier",
    "write_checkpoint",
    "read_checkpoint",
    "sha256_file",
    "sha256_bytes",
]

VERSION = 1
IMPORT_SOFTMAX_ATOL = 1e-4

_BUNDLE_HEADER = struct.Struct("<4sIQIIB")
_STATS_HEADER = struct.Struct("<4sIQI")
_CKPT_HEADER = struct.Struct("<4sII")  # magic, version, n_arrays


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated payload")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()

    def finish(self):
        if self.pos != len(self.data):
            raise FormatError(f"{self.path}: {len(self.data) - self.pos} trailing bytes")


def _open(path, magic: bytes) -> _Reader:
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    head = r.take(8)
    if head[:4] != magic:
        raise FormatError(f"{path}: bad magic {head[:4]!r}, expected {magic!r}")
    (version,) = struct.unpack("<I", head[4:])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    r.pos = 0
    return r


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


# -- feature bundles ---------------------------------------------------------

def bundle_bytes(bundle: FeatureBundle) -> bytes:
    m, d = bundle.features.shape
    k = bundle.softmax.shape[1]
    parts = [
        _BUNDLE_HEADER.pack(b"AEFB", VERSION, m, d, k, int(bundle.has_labels)),
        bundle.features.astype("<f4").tobytes(),
        bundle.softmax.astype("<f4").tobytes(),
    ]
    if bundle.has_labels:
        parts.append(bundle.labels.astype("<u4").tobytes())
    return b"".join(parts)


def write_bundle(path, bundle: FeatureBundle) -> Path:
    path = Path(path)
    path.write_bytes(bundle_bytes(bundle))
    return path


def read_bundle(path, source: str | None = None) -> FeatureBundle:
    """Load and validate a feature bundle file."""
    r = _open(path, b"AEFB")
    _, _, m, d, k, has_labels = r.unpack(_BUNDLE_HEADER)
    if has_labels not in (0, 1):
        raise FormatError(f"{path}: has_labels flag must be 0 or 1")
    if m < 2 or d < 1 or k < 2:
        raise FormatError(f"{path}: invalid dimensions M={m} d={d} K={k}")
    features = r.array("<f4", m * d).reshape(m, d).astype(np.float64)
    softmax = r.array("<f4", m * k).reshape(m, k).astype(np.float64)
    labels = r.array("<u4", m).astype(np.int64) if has_labels else None
    r.finish()
    if np.any(np.abs(softmax.sum(axis=1) - 1.0) > IMPORT_SOFTMAX_ATOL):
        raise ValidationError(f"{path}: softmax rows not normalised within {IMPORT_SOFTMAX_ATOL}")
    return FeatureBundle(
        features,
        softmax,
        labels,
        source if source is not None else Path(path).stem,
        softmax_atol=IMPORT_SOFTMAX_ATOL,
    )


# -- dataset statistics ------------------------------------------------------

def stats_bytes(stats: DatasetStats) -> bytes:
    return b"".join([
        _STATS_HEADER.pack(b"AEST", VERSION, stats.count, stats.dim),
        stats.mean.astype("<f8").tobytes(),
        stats.cov.astype("<f8").tobytes(),
    ])


def write_stats(path, stats: DatasetStats) -> Path:
    path = Path(path)
    path.write_bytes(stats_bytes(stats))
    return path


def read_stats(path) -> DatasetStats:
    r = _open(path, b"AEST")
    _, _, count, d = r.unpack(_STATS_HEADER)
    mean = r.array("<f8", d)
    cov = r.array("<f8", d * d).reshape(d, d)
    r.finish()
    return DatasetStats(mean, cov, count)


# -- checkpoints -------------------------------------------------------------

def checkpoint_bytes(magic: bytes, arrays: list) -> bytes:
    arrays = [np.asarray(a, dtype="<f8") for a in arrays]
    parts = [_CKPT_HEADER.pack(magic, VERSION, len(arrays))]
    for a in arrays:
        parts.append(struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}Q", *a.shape))
    parts.extend(a.tobytes() for a in arrays)
    return b"".join(parts)


def write_checkpoint(path, magic: bytes, arrays: list) -> Path:
    path = Path(path)
    path.write_bytes(checkpoint_bytes(magic, arrays))
    return path


def read_checkpoint(path, magic: bytes) -> list:
    r = _open(path, magic)
    _, _, n = r.unpack(_CKPT_HEADER)
    shapes = []
    for _ in range(n):
        (ndim,) = struct.unpack("<B", r.take(1))
        shapes.append(struct.unpack(f"<{ndim}Q", r.take(8 * ndim)))
    arrays = [r.array("<f8", int(np.prod(s, dtype=np.int64))).reshape(s) for s in shapes]
    r.finish()
    return arrays


def write_classifier(path, clf: TinyClassifier) -> Path:
    meta = np.array([clf.n_classes, *clf.input_shape], dtype=np.float64)
    return write_checkpoint(path, b"AECL", [meta, *clf.params])


def read_classifier(path) -> TinyClassifier:
    arrays = read_checkpoint(path, b"AECL")
    if len(arrays) != 7:
        raise FormatError(f"{path}: expected 7 arrays in classifier checkpoint")
    meta = arrays[0].astype(np.int64)
    params = arrays[1:]
    try:
        return TinyClassifier(params, tuple(meta[1:]), int(meta[0]))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
