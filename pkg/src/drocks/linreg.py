"""Logistic regression over PPV features, trained with mini-batch Adam.

Binary problems use a single sigmoid logit (``K + 1`` parameters); problems
with ``C > 2`` classes use a softmax head with ``C`` rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInput
from .rocket import KernelSet


@dataclass
class LinearModel:
    weights: np.ndarray  # (C_eff, K)
    intercepts: np.ndarray  # (C_eff,)
    class_count: int

    @property
    def task(self) -> str:
        return "binary" if self.class_count == 2 else "multiclass"

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    @property
    def n_params(self) -> int:
        return self.weights.size + self.intercepts.size

    def copy(self) -> "LinearModel":
        return LinearModel(self.weights.copy(), self.intercepts.copy(), self.class_count)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "class_count": self.class_count,
            "weights": self.weights.tolist(),
            "intercepts": self.intercepts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        c = int(d["class_count"])
        rows = 1 if c == 2 else c
        w = np.asarray(d["weights"], dtype=float).reshape(rows, -1)
        b = np.asarray(d["intercepts"], dtype=float).reshape(rows)
        return cls(w, b, c)

    def to_json(self) -> str:
        # json emits floats with repr(), the shortest round-trip form
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> "LinearModel":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 4
    local_epochs: int = 10
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidInput("learning_rate must be > 0")
        if self.batch_size < 1:
            raise InvalidInput("batch_size must be >= 1")
        if self.local_epochs < 0:
            raise InvalidInput("local_epochs must be >= 0")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, shuffle_seed=seed)


def init_model(n_features: int, class_count: int) -> LinearModel:
    if n_features < 1 or class_count < 2:
        raise InvalidInput("need n_features >= 1 and class_count >= 2")
    rows = 1 if class_count == 2 else class_count
    return LinearModel(np.zeros((rows, n_features)), np.zeros(rows), class_count)


def _check(features: np.ndarray, model: LinearModel) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != model.n_features:
        raise InvalidInput(
            f"feature width {features.shape[-1]} != model width {model.n_features}"
        )
    return features


def _check_labels(labels, class_count: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.size and (y.min() < 0 or y.max() >= class_count):
        raise InvalidInput(f"labels must lie in 0..{class_count - 1}")
    return y.astype(int)


def _logits(X: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    return X @ W.T + b


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(features, model: LinearModel) -> np.ndarray:
    """Class probabilities, shape (M, C); binary models return ``(1 - p, p)`` columns."""
    X = _check(features, model)
    z = _logits(X, model.weights, model.intercepts)
    if model.class_count == 2:
        p = _sigmoid(z[:, 0])
        return np.column_stack([1.0 - p, p])
    return _softmax(z)


def predict(features, model: LinearModel) -> np.ndarray:
    return predict_proba(features, model).argmax(axis=1)


def loss_and_grad(model: LinearModel, features, labels):
    """Mean cross-entropy and its gradient w.r.t. (weights, intercepts)."""
    X = _check(features, model)
    y = _check_labels(labels, model.class_count)
    z = _logits(X, model.weights, model.intercepts)
    n = X.shape[0]
    if model.class_count == 2:
        z = z[:, 0]
        # log(1 + e^-z) for y=1, log(1 + e^z) for y=0
        loss = np.mean(np.logaddexp(0.0, np.where(y == 1, -z, z)))
        resid = (_sigmoid(z) - y)[:, None]
    else:
        zs = z - z.max(axis=1, keepdims=True)
        logp = zs - np.log(np.exp(zs).sum(axis=1, keepdims=True))
        loss = -np.mean(logp[np.arange(n), y])
        resid = np.exp(logp)
        resid[np.arange(n), y] -= 1.0
    gW = resid.T @ X / n
    gb = resid.sum(axis=0) / n
    return float(loss), gW, gb


def fit(features, labels, model: LinearModel, cfg: TrainConfig) -> LinearModel:
    """Warm-started mini-batch Adam on cross-entropy.

    Parameters start from ``model`` (never reset); Adam moments start at zero
    on every call. Returns a new model, the input is not modified.
    """
    X = _check(features, model)
    y = _check_labels(labels, model.class_count)
    if len(y) != X.shape[0]:
        raise InvalidInput("features and labels differ in length")
    out = model.copy()
    if cfg.local_epochs == 0 or X.shape[0] == 0:
        return out

    W, b = out.weights, out.intercepts
    mW, vW = np.zeros_like(W), np.zeros_like(W)
    mb, vb = np.zeros_like(b), np.zeros_like(b)
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    rng = np.random.default_rng(cfg.shuffle_seed)
    t = 0
    for _ in range(cfg.local_epochs):
        order = rng.permutation(X.shape[0])
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, gW, gb = loss_and_grad(out, X[idx], y[idx])
            t += 1
            mW = b1 * mW + (1 - b1) * gW
            vW = b2 * vW + (1 - b2) * gW**2
            mb = b1 * mb + (1 - b1) * gb
            vb = b2 * vb + (1 - b2) * gb**2
            c1, c2 = 1 - b1**t, 1 - b2**t
            W -= cfg.learning_rate * (mW / c1) / (np.sqrt(vW / c2) + cfg.adam_eps)
            b -= cfg.learning_rate * (mb / c1) / (np.sqrt(vb / c2) + cfg.adam_eps)
    return out


def kernel_importance(model: LinearModel) -> np.ndarray:
    """Per-kernel score: sum over output rows of the squared weight."""
    return np.sum(model.weights**2, axis=0)


def top_p_positions(scores, seeds, p: int) -> np.ndarray:
    """Positions of the ``p`` largest scores; ties go to the smaller seed."""
    scores = np.asarray(scores, dtype=float)
    if not 1 <= p <= len(scores):
        raise InvalidInput(f"p={p} outside 1..{len(scores)}")
    seeds = np.asarray([int(s) for s in seeds], dtype=np.uint64)
    # lexsort: last key is primary
    order = np.lexsort((seeds, -scores))
    return order[:p]


def select_top_p(model: LinearModel, kernels: KernelSet, p: int):
    """The ``p`` most important kernels with their weight columns and the intercepts.

    Returned in descending order of importance.
    """
    if len(kernels) != model.n_features:
        raise InvalidInput("kernel set and model width differ")
    pos = top_p_positions(kernel_importance(model), kernels.seeds, p)
    return kernels.take(pos), model.weights[:, pos].copy(), model.intercepts.copy()
