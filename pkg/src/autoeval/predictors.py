"""Accuracy predictors: max-softmax thresholding, Huber linear regression
on the Frechet distance, and a small network on ``[fd; mean; Sigma @ c]``."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .classifier import FeatureBundle
from .errors import (
    DegenerateInputError,
    FormatError,
    InsufficientDataError,
    ParameterError,
    ShapeError,
    TrainingError,
)
from .formats import read_checkpoint, write_checkpoint
from .stats import DatasetStats, frechet_distance

__all__ = [
    "predict_confidence",
    "LinearPredictor",
    "fit_linear",
    "fit_ols",
    "predict_linear",
    "DatasetRepresentation",
    "assemble_representation",
    "NeuralConfig",
    "NeuralPredictor",
    "fit_neural",
    "predict_neural",
    "predict_neural_batch",
    "loss_and_grad",
    "save_linear",
    "load_linear",
    "save_neural",
    "load_neural",
]

HUBER_DELTA = 1.345
MAD_TO_SIGMA = 0.6744897501960817


def predict_confidence(bundle: FeatureBundle, tau: float) -> float:
    """Fraction of rows whose top softmax score is strictly above ``tau``."""
    if not 0.0 < tau < 1.0:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    if len(bundle) == 0:
        raise InsufficientDataError("empty bundle")
    return float(np.mean(bundle.softmax.max(axis=1) > tau))


# -- linear ------------------------------------------------------------------

@dataclass(frozen=True)
class LinearPredictor:
    w0: float
    w1: float
    converged: bool = True
    n_iter: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.w0) and np.isfinite(self.w1)):
            raise TrainingError("non-finite linear coefficients")

    def raw(self, fd) -> np.ndarray:
        return self.w1 * np.asarray(fd, dtype=np.float64) + self.w0


def _design(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError("expected a sequence of (fd, accuracy) pairs")
    if pts.shape[0] < 3:
        raise InsufficientDataError("need at least 3 points for a linear fit")
    if np.var(pts[:, 0]) == 0.0:
        raise DegenerateInputError("fd has zero variance")
    x = np.column_stack([np.ones(len(pts)), pts[:, 0]])
    return x, pts[:, 1]


def _wls(x, y, w):
    xw = x * w[:, None]
    return np.linalg.solve(x.T @ xw, xw.T @ y)


def fit_ols(points) -> LinearPredictor:
    x, y = _design(points)
    beta = _wls(x, y, np.ones(len(y)))
    return LinearPredictor(float(beta[0]), float(beta[1]))


def _huber_rho(u, delta):
    a = np.abs(u)
    return np.where(a <= delta, 0.5 * u * u, delta * a - 0.5 * delta * delta)


def fit_linear(points, delta: float = HUBER_DELTA, tol: float = 1e-9, max_iter: int = 100) -> LinearPredictor:
    """Huber M-estimate of ``accuracy = w1 * fd + w0`` by IRLS.

    Residuals are scaled by the normalised MAD of the current residuals, so
    ``delta`` is in units of the residual standard deviation. Stops when no
    coefficient moves by more than ``tol``. If ``max_iter`` is hit, the
    iterate with the lowest Huber objective is returned with
    ``converged=False`` and a warning.
    """
    x, y = _design(points)
    beta = _wls(x, y, np.ones(len(y)))
    best, best_obj = beta, np.inf
    for it in range(1, max_iter + 1):
        r = y - x @ beta
        scale = np.median(np.abs(r - np.median(r))) / MAD_TO_SIGMA
        if scale <= 1e-15 * max(1.0, float(np.max(np.abs(y)))):
            return LinearPredictor(float(beta[0]), float(beta[1]), True, it)
        u = r / scale
        obj = float(np.sum(_huber_rho(u, delta)))
        if obj < best_obj:
            best, best_obj = beta, obj
        absu = np.abs(u)
        w = np.where(absu <= delta, 1.0, delta / np.maximum(absu, 1e-300))
        new = _wls(x, y, w)
        if np.max(np.abs(new - beta)) < tol:
            return LinearPredictor(float(new[0]), float(new[1]), True, it)
        beta = new
    warnings.warn(f"Huber IRLS did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=2)
    return LinearPredictor(float(best[0]), float(best[1]), False, max_iter)


def predict_linear(p: LinearPredictor, fd: float) -> float:
    return float(np.clip(p.w1 * fd + p.w0, 0.0, 1.0))


# -- dataset representation --------------------------------------------------

@dataclass(frozen=True, eq=False)
class DatasetRepresentation:
    fd: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if not self.fd >= 0:
            raise ParameterError("fd must be non-negative")
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise ShapeError("cov does not match mean dimension")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def __eq__(self, other):
        if not isinstance(other, DatasetRepresentation):
            return NotImplemented
        return self.fd == other.fd and np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)


def assemble_representation(stats: DatasetStats, ori_stats: DatasetStats) -> DatasetRepresentation:
    if stats.dim != ori_stats.dim:
        raise ShapeError(f"dimension mismatch: {stats.dim} vs {ori_stats.dim}")
    return DatasetRepresentation(frechet_distance(ori_stats, stats), stats.mean, stats.cov)


# -- neural ------------------------------------------------------------------

@dataclass
class NeuralConfig:
    hidden: tuple = (128, 64)
    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 50
    restarts: int = 5


PARAM_NAMES = ("c", "W1", "b1", "W2", "b2", "W3", "b3")
NORM_NAMES = ("fd_scale", "mu_mean", "mu_std", "cov_mean", "cov_std")


@dataclass
class NeuralPredictor:
    """Network weights plus the input normalisers fitted on meta-train.

    Forward pass: ``sigma = ((Sigma - cov_mean) / cov_std) @ c`` (one
    coefficient per column, shared by all rows), then
    ``[fd / fd_scale; (mu - mu_mean) / mu_std; sigma]`` (length 1 + 2d)
    -> relu(128) -> relu(64) -> 1 -> logistic.
    """

    params: dict
    norm: dict
    best_val_rmse: float = float("nan")
    epochs_run: int = 0
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        for k, v in self.params.items():
            if not np.all(np.isfinite(v)):
                raise TrainingError(f"non-finite parameter {k}")
        d = self.dim
        if self.params["W1"].shape[0] != 1 + 2 * d:
            raise ShapeError("first layer input width must be 1 + 2d")

    @property
    def dim(self) -> int:
        return self.params["c"].shape[0]

    @property
    def input_dim(self) -> int:
        return self.params["W1"].shape[0]


def _fit_normalisers(reps) -> dict:
    fds = np.array([r.fd for r in reps])
    mus = np.stack([r.mean for r in reps])
    covs = np.stack([r.cov for r in reps])
    fd_scale = float(fds.mean())
    mu_std = mus.std(axis=0)
    cov_std = covs.std(axis=0)
    return {
        "fd_scale": np.array(fd_scale if fd_scale > 0 else 1.0),
        "mu_mean": mus.mean(axis=0),
        "mu_std": np.where(mu_std > 1e-8, mu_std, 1.0),
        "cov_mean": covs.mean(axis=0),
        "cov_std": np.where(cov_std > 1e-8, cov_std, 1.0),
    }


def _inputs(norm: dict, reps) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    fd = np.array([r.fd for r in reps]) / float(norm["fd_scale"])
    mu = (np.stack([r.mean for r in reps]) - norm["mu_mean"]) / norm["mu_std"]
    cov = (np.stack([r.cov for r in reps]) - norm["cov_mean"]) / norm["cov_std"]
    return fd, mu, cov


def _forward(params: dict, fd, mu, cov):
    sigma = np.einsum("nkj,j->nk", cov, params["c"])
    x = np.concatenate([fd[:, None], mu, sigma], axis=1)
    z1 = np.einsum("ni,ij->nj", x, params["W1"]) + params["b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = np.einsum("ni,ij->nj", a1, params["W2"]) + params["b2"]
    a2 = np.maximum(z2, 0.0)
    z3 = np.einsum("ni,ij->nj", a2, params["W3"])[:, 0] + params["b3"][0]
    out = 1.0 / (1.0 + np.exp(-z3))
    return out, (cov, x, z1, a1, z2, a2)


def loss_and_grad(params: dict, fd, mu, cov, y) -> tuple[float, dict]:
    """Mean squared error of the network on normalised inputs, and its gradient."""
    out, (cov, x, z1, a1, z2, a2) = _forward(params, fd, mu, cov)
    n = len(y)
    err = out - y
    loss = float(np.mean(err ** 2))
    dz3 = (2.0 / n) * err * out * (1.0 - out)
    g = {"W3": a2.T @ dz3[:, None], "b3": np.array([dz3.sum()])}
    da2 = dz3[:, None] @ params["W3"].T
    dz2 = da2 * (z2 > 0)
    g["W2"] = a1.T @ dz2
    g["b2"] = dz2.sum(0)
    da1 = dz2 @ params["W2"].T
    dz1 = da1 * (z1 > 0)
    g["W1"] = x.T @ dz1
    g["b1"] = dz1.sum(0)
    dx = dz1 @ params["W1"].T
    d = mu.shape[1]
    dsigma = dx[:, 1 + d :]
    g["c"] = np.einsum("nkj,nk->j", cov, dsigma)
    return loss, g


def _init_params(rng: np.random.Generator, d: int, hidden: tuple) -> dict:
    h1, h2 = hidden
    n_in = 1 + 2 * d
    return {
        "c": rng.normal(0.0, 1.0 / np.sqrt(d), size=d),
        "W1": rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, h1)),
        "b1": np.zeros(h1),
        "W2": rng.normal(0.0, np.sqrt(2.0 / h1), size=(h1, h2)),
        "b2": np.zeros(h2),
        "W3": rng.normal(0.0, np.sqrt(1.0 / h2), size=(h2, 1)),
        "b3": np.zeros(1),
    }


def _split_pairs(pairs):
    if len(pairs) == 0:
        raise InsufficientDataError("empty record list")
    reps = [p[0] for p in pairs]
    y = np.array([p[1] for p in pairs], dtype=np.float64)
    dims = {r.dim for r in reps}
    if len(dims) != 1:
        raise ShapeError("inconsistent representation dimensions")
    return reps, y


def fit_neural(meta_train, meta_val, config: NeuralConfig | None = None, seed: int = 0) -> NeuralPredictor:
    """Minimise mean squared error over meta-train with momentum SGD.

    The covariance-reduction coefficients are trained jointly with the
    dense layers. Each of ``config.restarts`` runs starts from its own
    initialisation; within a run the parameters with the lowest validation
    RMSE are kept, training stops after ``patience`` epochs without
    improvement, and the run with the lowest validation RMSE wins.
    """
    config = config or NeuralConfig()
    if config.restarts < 1:
        raise ParameterError("restarts must be at least 1")
    train_reps, y_train = _split_pairs(meta_train)
    val_reps, y_val = _split_pairs(meta_val)
    d = train_reps[0].dim
    if val_reps[0].dim != d:
        raise ShapeError("train and validation dimensions differ")

    norm = _fit_normalisers(train_reps)
    train = (*_inputs(norm, train_reps), y_train)
    val = (*_inputs(norm, val_reps), y_val)
    best = None
    for r in range(config.restarts):
        rng = np.random.default_rng([int(seed), r])
        run = _train_once(rng, d, config, train, val)
        if best is None or run[1] < best[1]:
            best = run
    params, rmse, epochs, history = best
    return NeuralPredictor(params, norm, rmse, epochs, history)


def _train_once(rng, d, config: NeuralConfig, train, val):
    fd_t, mu_t, cov_t, y_train = train
    fd_v, mu_v, cov_v, y_val = val
    params = _init_params(rng, d, tuple(config.hidden))
    vel = {k: np.zeros_like(v) for k, v in params.items()}

    def val_rmse():
        out, _ = _forward(params, fd_v, mu_v, cov_v)
        return float(np.sqrt(np.mean((out - y_val) ** 2)))

    best = {k: v.copy() for k, v in params.items()}
    best_rmse = val_rmse()
    since_best = 0
    history = []
    n = len(y_train)
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grad(params, fd_t[idx], mu_t[idx], cov_t[idx], y_train[idx])
            if not np.isfinite(loss):
                raise TrainingError("regression loss became non-finite")
            for k in params:
                vel[k] = config.momentum * vel[k] - config.lr * grads[k]
                params[k] = params[k] + vel[k]
        current = val_rmse()
        if not np.isfinite(current):
            raise TrainingError("validation error became non-finite")
        history.append(current)
        if current < best_rmse:
            best_rmse = current
            best = {k: v.copy() for k, v in params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return best, best_rmse, epoch, history


def predict_neural_batch(p: NeuralPredictor, reps) -> np.ndarray:
    for r in reps:
        if r.dim != p.dim:
            raise ShapeError(f"representation dim {r.dim} does not match predictor dim {p.dim}")
    out, _ = _forward(p.params, *_inputs(p.norm, reps))
    return out


def predict_neural(p: NeuralPredictor, rep: DatasetRepresentation) -> float:
    return float(predict_neural_batch(p, [rep])[0])


# -- checkpoints -------------------------------------------------------------

def save_linear(path, p: LinearPredictor):
    return write_checkpoint(path, b"AELP", [np.array([p.w0, p.w1, float(p.converged), float(p.n_iter)])])


def load_linear(path) -> LinearPredictor:
    (arr,) = read_checkpoint(path, b"AELP")
    return LinearPredictor(float(arr[0]), float(arr[1]), bool(arr[2]), int(arr[3]))


def save_neural(path, p: NeuralPredictor):
    arrays = [p.params[k] for k in PARAM_NAMES] + [p.norm[k] for k in NORM_NAMES]
    arrays.append(np.array([p.best_val_rmse, float(p.epochs_run)]))
    return write_checkpoint(path, b"AENP", arrays)


def load_neural(path) -> NeuralPredictor:
    arrays = read_checkpoint(path, b"AENP")
    if len(arrays) != len(PARAM_NAMES) + len(NORM_NAMES) + 1:
        raise FormatError(f"{path}: unexpected array count in neural checkpoint")
    params = dict(zip(PARAM_NAMES, arrays[: len(PARAM_NAMES)]))
    norm = dict(zip(NORM_NAMES, arrays[len(PARAM_NAMES) : -1]))
    meta = arrays[-1]
    return NeuralPredictor(params, norm, float(meta[0]), int(meta[1]))
