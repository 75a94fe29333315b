"""Desk-scale image classifier: a three-layer perceptron trained with
momentum SGD, plus feature/softmax extraction and accuracy counting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateInputError,
    InsufficientDataError,
    ShapeError,
    TrainingError,
    ValidationError,
)

__all__ = [
    "LabeledImageSet",
    "TinyClassifier",
    "FeatureBundle",
    "TrainConfig",
    "train_classifier",
    "extract_features",
    "accuracy",
    "bundle_accuracy",
    "argmax_lowest",
]


@dataclass
class LabeledImageSet:
    """Stack of H x W x C rasters in [0, 1] with integer class labels."""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ShapeError(f"images must be (M, H, W, C), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ShapeError("images and labels differ in length")
        if self.n_classes < 2:
            raise DegenerateInputError("need at least 2 classes")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ShapeError("labels outside [0, n_classes)")

    def __len__(self):
        return self.images.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, index) -> "LabeledImageSet":
        index = np.asarray(index)
        if index.dtype != bool:
            index = index.astype(np.int64)
        return LabeledImageSet(self.images[index], self.labels[index], self.n_classes)


@dataclass
class TrainConfig:
    hidden: int = 64
    epochs: int = 20
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9


@dataclass
class TinyClassifier:
    """flatten -> dense(h, relu) -> dense(h, relu) -> dense(K) -> softmax.

    ``params`` holds ``[W1, b1, W2, b2, W3, b3]``; weights are stored
    (fan_in, fan_out). The second hidden activation is the feature layer.
    """

    params: list
    input_shape: tuple
    n_classes: int

    def __post_init__(self):
        self.params = [np.asarray(p, dtype=np.float64) for p in self.params]
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if len(self.params) != 6:
            raise ShapeError("expected 6 parameter arrays")
        if self.params[4].shape[1] != self.n_classes:
            raise ShapeError("output layer width does not match n_classes")
        if not all(np.all(np.isfinite(p)) for p in self.params):
            raise TrainingError("non-finite classifier parameters")

    @property
    def feature_dim(self) -> int:
        return self.params[2].shape[1]

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.input_shape))


@dataclass
class FeatureBundle:
    """Penultimate features and softmax rows for one dataset."""

    features: np.ndarray
    softmax: np.ndarray
    labels: Optional[np.ndarray] = None
    source: str = ""
    softmax_atol: float = field(default=1e-6, repr=False, compare=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.softmax = np.asarray(self.softmax, dtype=np.float64)
        if self.features.ndim != 2 or self.softmax.ndim != 2:
            raise ShapeError("features and softmax must be 2-D")
        m = self.features.shape[0]
        if self.softmax.shape[0] != m:
            raise ShapeError("features and softmax row counts differ")
        if m < 2:
            raise InsufficientDataError("a bundle needs at least 2 rows")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.softmax))):
            raise ValidationError("non-finite values in bundle")
        if np.any(self.softmax < 0):
            raise ValidationError("negative softmax entries")
        if np.max(np.abs(self.softmax.sum(axis=1) - 1.0)) > self.softmax_atol:
            raise ValidationError("softmax rows do not sum to 1")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (m,):
                raise ShapeError("labels length does not match bundle rows")
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
                raise ValidationError("labels outside [0, K)")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.softmax.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None


def _relu(x):
    return np.maximum(x, 0.0)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def argmax_lowest(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest column index."""
    return np.argmax(scores, axis=1)


def _init_params(rng: np.random.Generator, n_in: int, hidden: int, n_out: int) -> list:
    params = []
    for fan_in, fan_out in ((n_in, hidden), (hidden, hidden), (hidden, n_out)):
        params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def train_classifier(train: LabeledImageSet, config: TrainConfig | None = None, seed: int = 0) -> TinyClassifier:
    """Mini-batch SGD with momentum on softmax cross-entropy.

    Deterministic for a given ``seed``: the generator drives both the weight
    initialisation and the per-epoch shuffles.
    """
    config = config or TrainConfig()
    m = len(train)
    if m == 0:
        raise InsufficientDataError("empty training set")
    if np.unique(train.labels).size < 2:
        raise DegenerateInputError("training labels cover fewer than 2 classes")

    rng = np.random.default_rng(seed)
    x_all = train.images.reshape(m, -1)
    k = train.n_classes
    params = _init_params(rng, x_all.shape[1], config.hidden, k)
    velocity = [np.zeros_like(p) for p in params]
    onehot = np.eye(k)[train.labels]

    for _ in range(config.epochs):
        order = rng.permutation(m)
        for start in range(0, m, config.batch_size):
            idx = order[start : start + config.batch_size]
            x, y = x_all[idx], onehot[idx]
            W1, b1, W2, b2, W3, b3 = params
            z1 = x @ W1 + b1
            a1 = _relu(z1)
            z2 = a1 @ W2 + b2
            a2 = _relu(z2)
            p = _softmax(a2 @ W3 + b3)
            loss = -np.mean(np.sum(y * np.log(p + 1e-300), axis=1))
            if not np.isfinite(loss):
                raise TrainingError("cross-entropy became non-finite")

            n = x.shape[0]
            dz3 = (p - y) / n
            da2 = dz3 @ W3.T
            dz2 = da2 * (z2 > 0)
            da1 = dz2 @ W2.T
            dz1 = da1 * (z1 > 0)
            grads = [x.T @ dz1, dz1.sum(0), a1.T @ dz2, dz2.sum(0), a2.T @ dz3, dz3.sum(0)]
            for i, g in enumerate(grads):
                velocity[i] = config.momentum * velocity[i] - config.lr * g
                params[i] = params[i] + velocity[i]

    if not all(np.all(np.isfinite(p)) for p in params):
        raise TrainingError("parameters diverged")
    return TinyClassifier(params, train.image_shape, k)


def _dense(x, w, b):
    # einsum evaluates each output row independently of the batch it sits in,
    # unlike BLAS gemm whose blocking depends on the batch size.
    return np.einsum("ij,jk->ik", x, w) + b


def _forward(clf: TinyClassifier, images) -> tuple[np.ndarray, np.ndarray]:
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == len(clf.input_shape):
        images = images[None]
    if tuple(images.shape[1:]) != clf.input_shape:
        raise ShapeError(f"images of shape {images.shape[1:]} do not match classifier input {clf.input_shape}")
    W1, b1, W2, b2, W3, b3 = clf.params
    x = images.reshape(images.shape[0], -1)
    feats = _relu(_dense(_relu(_dense(x, W1, b1)), W2, b2))
    probs = _softmax(_dense(feats, W3, b3))
    # Outputs are rounded to float32 so in-memory values equal what the bundle
    # file format stores; argmax and statistics then agree after a round trip.
    return _as_f32(feats), _as_f32(probs)


def _as_f32(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float32).astype(np.float64)


def extract_features(clf: TinyClassifier, images, labels=None, source: str = "") -> FeatureBundle:
    """Post-ReLU second-hidden-layer activations plus softmax rows."""
    feats, probs = _forward(clf, images)
    return FeatureBundle(feats, probs, labels, source)


def predict_labels(clf: TinyClassifier, images) -> np.ndarray:
    return argmax_lowest(_forward(clf, images)[1])


def accuracy(clf: TinyClassifier, data: LabeledImageSet) -> float:
    """Fraction of images whose argmax class equals the label."""
    if len(data) == 0:
        raise InsufficientDataError("accuracy of an empty set is undefined")
    return float(np.mean(predict_labels(clf, data.images) == data.labels))


def bundle_accuracy(bundle: FeatureBundle) -> float:
    if bundle.labels is None:
        raise InsufficientDataError("bundle carries no labels")
    return float(np.mean(argmax_lowest(bundle.softmax) == bundle.labels))
