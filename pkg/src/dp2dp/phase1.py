"""Phase-1 probability model: multinomial logistic regression with an
l2 penalty, trained by full-batch gradient descent, privatized by one
Gaussian perturbation of the released weights.

The weight release is the single private artifact; every later
probability evaluation is post-processing of it and the outputs stay
exact simplex vectors (softmax of perturbed logits).  The noise scale is
calibrated externally from a user-supplied sensitivity bound.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .core import LabeledDataset
from .errors import ConfigError, DataError, NumericError


@dataclass(frozen=True)
class Phase1Config:
    iterations: int = 300
    learning_rate: float = 0.5
    reg_strength: float = 1.0  # inverse-C convention: penalty reg/(2n) ||W||^2
    perturb_sigma: float = 0.0
    seed: int = 0
    include_sensitive: bool = False  # append s to the feature vector

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be nonnegative")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.reg_strength <= 0:
            raise ConfigError("reg_strength must be positive")
        if self.perturb_sigma < 0:
            raise ConfigError("perturb_sigma must be nonnegative")


@dataclass(frozen=True)
class LogRegModel:
    """K x (d+1) weight matrix, bias in the last column."""

    weights: np.ndarray
    reg_strength: float
    trained: bool = False
    include_sensitive: bool = False
    perturb_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 2:
            raise ConfigError("weights must be (K, d+1) with K >= 2")
        if not np.all(np.isfinite(w)):
            raise NumericError("weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        d = self.weights.shape[1] - 1
        return d - 1 if self.include_sensitive else d

    def predict_probs(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        return predict_probs(self, x, s)

    def to_json(self) -> str:
        return json.dumps({
            "K": self.n_classes,
            "d": self.weights.shape[1] - 1,
            "weights": [float(v) for v in self.weights.ravel()],  # row-major
            "reg_strength": self.reg_strength,
            "perturb_sigma": self.perturb_sigma,
            "seed": self.seed,
            "include_sensitive": self.include_sensitive,
        })

    @staticmethod
    def from_json(text: str) -> "LogRegModel":
        doc = json.loads(text)
        k, d = int(doc["K"]), int(doc["d"])
        w = np.array(doc["weights"], dtype=np.float64).reshape(k, d + 1)
        return LogRegModel(
            weights=w,
            reg_strength=float(doc["reg_strength"]),
            trained=True,
            include_sensitive=bool(doc.get("include_sensitive", False)),
            perturb_sigma=float(doc.get("perturb_sigma", 0.0)),
            seed=int(doc.get("seed", 0)),
        )


def _design_matrix(x: np.ndarray, s: np.ndarray, include_sensitive: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    cols = [x]
    if include_sensitive:
        cols.append(np.asarray(s, dtype=np.float64)[:, None])
    cols.append(np.ones((len(x), 1)))
    return np.concatenate(cols, axis=1)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_logreg(d: LabeledDataset, cfg: Phase1Config) -> LogRegModel:
    """Fit the regularized cross-entropy objective by plain gradient
    descent from zero weights; stops at gradient norm 1e-6 or the
    iteration cap.  Deterministic for fixed inputs."""
    if len(np.unique(d.y)) < 2:
        raise DataError("training needs at least two distinct labels")
    k = d.n_classes
    X = _design_matrix(d.x, d.s, cfg.include_sensitive)
    n, p = X.shape
    onehot = np.zeros((n, k))
    onehot[np.arange(n), d.y - 1] = 1.0

    W = np.zeros((k, p))
    for _ in range(cfg.iterations):
        probs = _softmax_rows(X @ W.T)
        loss = -np.mean(np.log(np.maximum(probs[np.arange(n), d.y - 1], 1e-300)))
        loss += cfg.reg_strength * np.sum(W * W) / (2 * n)
        if not np.isfinite(loss):
            raise NumericError("training diverged: non-finite loss")
        grad = (probs - onehot).T @ X / n + cfg.reg_strength * W / n
        if np.linalg.norm(grad) <= 1e-6:
            break
        W -= cfg.learning_rate * grad

    return LogRegModel(
        weights=W,
        reg_strength=cfg.reg_strength,
        trained=True,
        include_sensitive=cfg.include_sensitive,
        seed=cfg.seed,
    )


def perturb_output(m: LogRegModel, sigma: float, rng: np.random.Generator) -> LogRegModel:
    """Gaussian output perturbation: independent N(0, sigma^2) on every
    weight entry.  Returns a new model; sigma = 0 is the identity."""
    if not m.trained:
        raise ConfigError("model must be trained before perturbation")
    if sigma < 0:
        raise ConfigError("sigma must be nonnegative")
    if sigma == 0:
        return m
    noise = rng.normal(0.0, sigma, size=m.weights.shape)
    return replace(m, weights=m.weights + noise, perturb_sigma=sigma)


def predict_probs(m: LogRegModel, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Class probabilities (rows sum to 1).  The sensitive attribute is
    accepted for interface uniformity and ignored unless the model was
    trained with include_sensitive."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
        s = np.atleast_1d(s)
    if x.shape[1] != m.dim:
        raise DataError(f"expected {m.dim} features, got {x.shape[1]}")
    X = _design_matrix(x, s, m.include_sensitive)
    probs = _softmax_rows(X @ m.weights.T)
    return probs[0] if single else probs
