"""Binary logistic classifier trained with mini-batch SGD.

Parameters live in a flat vector (weights then bias, dimension d+1) so they
can be exchanged, averaged, and clustered as plain points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import ClientShard, Dataset
from .errors import ParameterError, ShapeError

PROB_FLOOR = 1e-12  # keeps log-loss finite on saturated predictions
INIT_SCALE = 0.01


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Immutable flat vector of model weights (weights then bias)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ParameterError("parameter vector must be 1-D and non-empty")
        if not np.all(np.isfinite(values)):
            raise ParameterError("parameter vector contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class TrainConfig:
    """Local SGD hyperparameters; the seed drives batch order only."""

    learning_rate: float = 0.1
    epochs: int = 1
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ParameterError("learning_rate must be non-negative")
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    loss: float


def init_params(dim: int, seed: int) -> ParameterVector:
    """Small uniform random initialization in [-0.01, 0.01], seeded."""
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    return ParameterVector(rng.uniform(-INIT_SCALE, INIT_SCALE, size=dim))


def _check_dim(params: ParameterVector, n_features: int) -> None:
    if params.dim != n_features + 1:
        raise ShapeError(
            f"parameter dimension {params.dim} does not match "
            f"{n_features} features + bias"
        )


def predict_proba(params: ParameterVector, features: np.ndarray) -> np.ndarray:
    _check_dim(params, features.shape[1])
    return expit(features @ params.values[:-1] + params.values[-1])


def logistic_loss(params: ParameterVector, features: np.ndarray, labels: np.ndarray) -> float:
    p = np.clip(predict_proba(params, features), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return float(-np.mean(labels * np.log(p) + (1 - labels) * np.log(1 - p)))


def logistic_gradient(
    params: ParameterVector, features: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Gradient of the mean log-loss with respect to the flat parameters."""
    residual = predict_proba(params, features) - labels
    return np.append(features.T @ residual, residual.sum()) / len(labels)


def local_train(params: ParameterVector, shard: ClientShard, cfg: TrainConfig) -> ParameterVector:
    """Run ``cfg.epochs`` passes of mini-batch SGD on the shard's log-loss.

    The input vector is never modified; the returned vector is a fresh one.
    Batch order is drawn from a generator seeded with ``cfg.seed``, so the
    result is bit-reproducible and independent of scheduling.
    """
    data = shard.data
    if data.n_samples == 0:
        raise ParameterError("cannot train on an empty shard")
    _check_dim(params, data.n_features)
    values = params.values.copy()
    if cfg.epochs == 0 or cfg.learning_rate == 0:
        return ParameterVector(values)

    features, labels = data.features, data.labels
    n = data.n_samples
    batch = min(cfg.batch_size, n)
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            x, y = features[idx], labels[idx]
            residual = expit(x @ values[:-1] + values[-1]) - y
            grad = np.append(x.T @ residual, residual.sum()) / len(idx)
            values -= cfg.learning_rate * grad
    return ParameterVector(values)


def evaluate(params: ParameterVector, data: Dataset) -> Metrics:
    """Accuracy of the 0.5-thresholded prediction and mean binary log-loss."""
    if data.n_samples == 0:
        raise ParameterError("cannot evaluate on an empty dataset")
    p = predict_proba(params, data.features)
    predicted = (p >= 0.5).astype(np.int64)
    accuracy = float(np.mean(predicted == data.labels))
    clipped = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    loss = float(-np.mean(data.labels * np.log(clipped) + (1 - data.labels) * np.log(1 - clipped)))
    return Metrics(accuracy=accuracy, loss=loss)
