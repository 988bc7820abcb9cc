"""Base classifiers mapping points in R^N to integer labels.

All classifiers are vectorised: ``predict`` takes an ``(n, N)`` array and
returns ``n`` labels. ``classify`` is the single-point convenience.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .sigma import SigmaField, pairwise_distances

__all__ = [
    "BaseClassifier",
    "ConstantClassifier",
    "LinearHalfSpace",
    "BallIndicator",
    "KnnVote",
    "TinyMlp",
    "TrainingConfig",
    "train_mlp",
]


class BaseClassifier(ABC):
    num_classes: int = 2

    @abstractmethod
    def predict(self, x: np.ndarray) -> np.ndarray:
        """Labels for the rows of ``x``."""

    def classify(self, x) -> int:
        return int(self.predict(np.atleast_2d(np.asarray(x, dtype=float)))[0])


@dataclass(frozen=True)
class ConstantClassifier(BaseClassifier):
    label: int = 0
    num_classes: int = 2

    def predict(self, x):
        return np.full(np.atleast_2d(x).shape[0], self.label, dtype=np.int64)


@dataclass(frozen=True)
class LinearHalfSpace(BaseClassifier):
    """Class 1 where ``normal . x + offset > 0``, class 0 elsewhere."""

    normal: np.ndarray
    offset: float = 0.0
    num_classes: int = 2

    def predict(self, x):
        x = np.atleast_2d(x)
        return (x @ np.asarray(self.normal, dtype=float) + self.offset > 0).astype(np.int64)


@dataclass(frozen=True)
class BallIndicator(BaseClassifier):
    """Class 1 inside the closed ball, class 0 outside."""

    center: np.ndarray
    radius: float = 1.0
    num_classes: int = 2

    def predict(self, x):
        x = np.atleast_2d(x)
        d2 = np.sum((x - np.asarray(self.center, dtype=float)) ** 2, axis=1)
        return (d2 <= self.radius**2).astype(np.int64)


@dataclass(frozen=True)
class KnnVote(BaseClassifier):
    """Majority label among the ``k`` nearest labelled points.

    Vote ties go to the smallest label.
    """

    points: np.ndarray
    labels: np.ndarray
    k: int = 5
    num_classes: int = 2

    def predict(self, x):
        d = pairwise_distances(np.atleast_2d(x), np.asarray(self.points, dtype=float))
        idx = np.argsort(d, axis=1, kind="stable")[:, : self.k]
        votes = np.asarray(self.labels)[idx]
        counts = np.stack([(votes == c).sum(axis=1) for c in range(self.num_classes)], axis=1)
        return np.argmax(counts, axis=1).astype(np.int64)


@dataclass
class TinyMlp(BaseClassifier):
    """Feed-forward ReLU network. Inputs are standardised before layer one.

    ``weights[i]`` has shape ``(fan_in, fan_out)``.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    shift: np.ndarray
    scale: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    @classmethod
    def init(cls, sizes, rng: np.random.Generator, shift=None, scale=None) -> TinyMlp:
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        shift = np.zeros(sizes[0]) if shift is None else np.asarray(shift, dtype=float)
        scale = np.ones(sizes[0]) if scale is None else np.asarray(scale, dtype=float)
        return cls(weights, biases, shift, scale)

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = (np.atleast_2d(x) - self.shift) / self.scale
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def predict(self, x):
        return np.argmax(self.logits(x), axis=1).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> TinyMlp:
        return cls(
            [np.asarray(w, dtype=float) for w in d["weights"]],
            [np.asarray(b, dtype=float) for b in d["biases"]],
            np.asarray(d["shift"], dtype=float),
            np.asarray(d["scale"], dtype=float),
        )


@dataclass(frozen=True)
class TrainingConfig:
    """Minibatch SGD settings for :func:`train_mlp`.

    ``noise_sigma`` adds Gaussian augmentation with a constant scale.
    ``noise_field`` draws the per-example scale from a sigma field instead.
    """

    hidden: tuple[int, ...] = (20, 20)
    epochs: int = 400
    batch_size: int = 32
    learning_rate: float = 0.05
    lr_decay: float = 0.995
    noise_sigma: float = 0.0
    noise_field: SigmaField | None = field(default=None, compare=False)
    seed: int = 0


def train_mlp(points, labels, cfg: TrainingConfig = TrainingConfig(), num_classes=None) -> TinyMlp:
    """Fit a :class:`TinyMlp` by plain minibatch SGD on cross-entropy."""
    x = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    k = int(num_classes or y.max() + 1)
    rng = np.random.default_rng(cfg.seed)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    net = TinyMlp.init((x.shape[1], *cfg.hidden, k), rng, x.mean(axis=0), scale)
    if cfg.noise_field is not None:
        per_example = np.asarray(cfg.noise_field.sigma(x), dtype=float)
    else:
        per_example = np.full(len(x), cfg.noise_sigma)
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = x[idx]
            if np.any(per_example[idx] > 0):
                xb = xb + rng.standard_normal(xb.shape) * per_example[idx, None]
            _sgd_step(net, xb, y[idx], lr)
        lr *= cfg.lr_decay
    return net


def _sgd_step(net: TinyMlp, xb: np.ndarray, yb: np.ndarray, lr: float) -> None:
    acts = [(xb - net.shift) / net.scale]
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        acts.append(np.maximum(acts[-1] @ w + b, 0.0))
    z = acts[-1] @ net.weights[-1] + net.biases[-1]
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(len(yb)), yb] -= 1.0
    grad = p / len(yb)
    for i in range(len(net.weights) - 1, -1, -1):
        gw = acts[i].T @ grad
        gb = grad.sum(axis=0)
        if i > 0:
            grad = (grad @ net.weights[i].T) * (acts[i] > 0)
        net.weights[i] -= lr * gw
        net.biases[i] -= lr * gb
