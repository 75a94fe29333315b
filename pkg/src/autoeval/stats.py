"""Dense statistics kernels: feature moments, PSD square roots, Frechet
distance, rank correlation and error metrics.

Matrices and vectors are plain float64 ``numpy.ndarray`` objects. All
functions are pure and never mutate their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateInputError,
    InsufficientDataError,
    NumericalError,
    ShapeError,
)

__all__ = [
    "DatasetStats",
    "compute_stats",
    "sqrtm_psd",
    "frechet_distance",
    "rankdata",
    "spearman_rho",
    "rmse",
    "mae",
]

SYMMETRY_RTOL = 1e-9
RIDGE_FACTOR = 1e-6


@dataclass(frozen=True, eq=False)
class DatasetStats:
    """Mean vector, covariance matrix and image count of one dataset."""

    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1:
            raise ShapeError(f"mean must be 1-D, got shape {mean.shape}")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ShapeError(f"cov shape {cov.shape} does not match mean dim {d}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise NumericalError("non-finite entries in dataset statistics")
        _check_symmetric(cov)
        if int(self.count) < 2:
            raise InsufficientDataError(f"count must be >= 2, got {self.count}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "count", int(self.count))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DatasetStats):
            return NotImplemented
        return (
            self.count == other.count
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )


def _check_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> None:
    scale = max(float(np.max(np.abs(a))), 1.0) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > rtol * scale:
        raise ShapeError("matrix is not symmetric within tolerance")


def compute_stats(features) -> DatasetStats:
    """Arithmetic mean and unbiased (M-1) covariance of feature rows.

    Sums are accumulated in extended precision; the covariance is
    symmetrised afterwards so it is exactly symmetric.
    """
    try:
        x = np.asarray(features, dtype=np.float64)
    except ValueError as exc:
        raise ShapeError("feature vectors have inconsistent dimensions") from exc
    if x.ndim != 2:
        if x.ndim == 1 and len(x) < 2:
            raise InsufficientDataError("need at least 2 feature vectors")
        raise ShapeError(f"features must form an M x d matrix, got shape {x.shape}")
    m = x.shape[0]
    if m < 2:
        raise InsufficientDataError(f"need at least 2 feature vectors, got {m}")
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite feature values")

    xl = x.astype(np.longdouble)
    mean = xl.sum(axis=0) / m
    centered = xl - mean
    cov = (centered.T @ centered) / (m - 1)
    cov = 0.5 * (cov + cov.T)
    return DatasetStats(mean.astype(np.float64), cov.astype(np.float64), m)


def sqrtm_psd(a) -> np.ndarray:
    """Symmetric square root of a symmetric, nominally PSD matrix.

    Eigenvalues below ``-1e-6 * trace/dim`` trigger a ridge shift of that
    size; any remaining negative eigenvalues are clamped to zero.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    _check_symmetric(a)
    n = a.shape[0]
    if n == 0:
        return a.copy()
    sym = 0.5 * (a + a.T)
    try:
        w, v = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition did not converge") from exc

    eps = RIDGE_FACTOR * abs(float(np.trace(sym))) / n
    if w[0] < -eps:
        w = w + eps
    root = np.sqrt(np.clip(w, 0.0, None))
    s = (v * root) @ v.T
    return 0.5 * (s + s.T)


def frechet_distance(a: DatasetStats, b: DatasetStats) -> float:
    """Frechet distance between two Gaussians given by their moments.

    ``(Sa Sb)^{1/2}`` is evaluated as ``sqrtm(Sa^{1/2} Sb Sa^{1/2})``, which
    has the same trace but only needs square roots of PSD matrices.
    """
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    root_a = sqrtm_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    inner = 0.5 * (inner + inner.T)
    tr_cross = float(np.trace(sqrtm_psd(inner)))
    value = float(diff @ diff) + float(np.trace(a.cov)) + float(np.trace(b.cov)) - 2.0 * tr_cross
    return max(value, 0.0)


def rankdata(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank span."""
    a = np.asarray(x, dtype=np.float64).ravel()
    n = a.size
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.size != y.size:
        raise InsufficientDataError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise InsufficientDataError("spearman_rho needs at least 3 points")
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sxx = float(rx @ rx)
    syy = float(ry @ ry)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("zero rank variance")
    rho = float(rx @ ry) / np.sqrt(sxx * syy)
    return float(np.clip(rho, -1.0, 1.0))


def _paired(preds, truths) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(truths, dtype=np.float64).ravel()
    if p.size != t.size:
        raise InsufficientDataError(f"length mismatch: {p.size} vs {t.size}")
    if p.size == 0:
        raise InsufficientDataError("empty inputs")
    return p, t


def rmse(preds, truths) -> float:
    p, t = _paired(preds, truths)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mae(preds, truths) -> float:
    p, t = _paired(preds, truths)
    return float(np.mean(np.abs(p - t)))
