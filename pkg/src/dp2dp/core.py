"""Domain types shared by all modules: datasets, multipliers, classifiers.

Conventions
-----------
* The sensitive attribute takes values in {-1, +1}; exactly two groups.
* Class labels are 1-based contiguous integers 1..K.
* All containers are immutable after construction and safe to share
  across threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ConfigError, DataError

GROUPS = (-1, 1)


def _check_sensitive(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.int64)
    if s.ndim != 1:
        raise DataError("sensitive attribute must be a 1-d array")
    if not np.isin(s, GROUPS).all():
        bad = np.unique(s[~np.isin(s, GROUPS)])
        raise DataError(f"sensitive attribute values must be in {{-1, +1}}, got {bad}")
    return s


@dataclass(frozen=True)
class UnlabeledDataset:
    """Feature rows with a binary sensitive attribute."""

    x: np.ndarray  # (n, d) float
    s: np.ndarray  # (n,) int in {-1, +1}

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise DataError("x must be a nonempty (n, d) array")
        s = _check_sensitive(self.s)
        if len(s) != len(x):
            raise DataError("x and s must have the same length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class LabeledDataset:
    """Feature rows with sensitive attribute and class label in 1..K."""

    x: np.ndarray  # (n, d) float
    s: np.ndarray  # (n,) int in {-1, +1}
    y: np.ndarray  # (n,) int in 1..n_classes
    n_classes: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise DataError("x must be a nonempty (n, d) array")
        s = _check_sensitive(self.s)
        y = np.asarray(self.y, dtype=np.int64)
        if self.n_classes < 2:
            raise ConfigError("n_classes must be at least 2")
        if len(s) != len(x) or len(y) != len(x):
            raise DataError("x, s and y must have the same length")
        if y.min() < 1 or y.max() > self.n_classes:
            raise DataError(f"labels must lie in 1..{self.n_classes}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def unlabeled(self) -> UnlabeledDataset:
        return UnlabeledDataset(self.x, self.s)


class ProbabilityModel(Protocol):
    """Anything that maps feature batches to K-simplex probability rows.

    ``predict_probs`` takes ``x`` of shape (n, d) and ``s`` of shape (n,)
    and returns an (n, K) array of rows summing to 1.
    """

    n_classes: int

    def predict_probs(self, x: np.ndarray, s: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class LagrangeParams:
    """Box-constrained dual variables (lambda1, lambda2) in [0, c_lambda]^2K."""

    lambda1: np.ndarray  # (K,)
    lambda2: np.ndarray  # (K,)
    c_lambda: float

    def __post_init__(self):
        l1 = np.asarray(self.lambda1, dtype=np.float64)
        l2 = np.asarray(self.lambda2, dtype=np.float64)
        if self.c_lambda <= 0:
            raise ConfigError("c_lambda must be positive")
        if l1.shape != l2.shape or l1.ndim != 1:
            raise ConfigError("lambda1 and lambda2 must be 1-d arrays of equal length")
        for name, arr in (("lambda1", l1), ("lambda2", l2)):
            if (arr < 0).any() or (arr > self.c_lambda).any():
                raise ConfigError(f"{name} must lie in [0, {self.c_lambda}]")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)

    @property
    def n_classes(self) -> int:
        return len(self.lambda1)

    def as_vector(self) -> np.ndarray:
        """Stacked (2K,) vector, lambda1 first."""
        return np.concatenate([self.lambda1, self.lambda2])

    @staticmethod
    def from_vector(v: np.ndarray, c_lambda: float) -> "LagrangeParams":
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 1 or len(v) % 2 != 0:
            raise ConfigError("vector length must be even")
        k = len(v) // 2
        return LagrangeParams(v[:k], v[k:], c_lambda)

    @staticmethod
    def zeros(n_classes: int, c_lambda: float) -> "LagrangeParams":
        return LagrangeParams(np.zeros(n_classes), np.zeros(n_classes), c_lambda)


@dataclass(frozen=True)
class PrivatizedProportions:
    """Noisy group frequencies; values may fall outside [0, 1].

    The Gaussian mechanism can push a proportion below 0 or above 1 and
    consumers must use the noisy value as-is: clipping would change the
    mechanism whose privacy is being accounted.
    """

    pi: dict[int, float]

    def __post_init__(self):
        if set(self.pi) != set(GROUPS):
            raise ConfigError(f"proportions must be keyed by {GROUPS}")
        object.__setattr__(self, "pi", {k: float(v) for k, v in self.pi.items()})

    def __getitem__(self, s: int) -> float:
        return self.pi[s]

    def gather(self, s: np.ndarray) -> np.ndarray:
        """Per-row proportion for an array of group labels."""
        return np.where(np.asarray(s) == 1, self.pi[1], self.pi[-1]).astype(np.float64)


def partition_by_group(d: UnlabeledDataset) -> dict[int, np.ndarray]:
    """Split feature rows by sensitive attribute.

    Returns {s: (N_s, d) array} for s in (-1, +1); a group absent from the
    data maps to an empty array, and consumers decide whether that is an
    error.
    """
    return {s: d.x[d.s == s] for s in GROUPS}


@dataclass(frozen=True)
class FairClassifier:
    """Recalibrated classifier: argmax_k pi_s * p_k(x, s) - s (l1_k - l2_k).

    Ties are broken toward the smallest class index so that predictions are
    a deterministic function of (x, s).
    """

    model: ProbabilityModel
    proportions: PrivatizedProportions
    lam: LagrangeParams

    def scores(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        s = np.asarray(s, dtype=np.int64)
        if x.ndim == 1:
            x = x[None, :]
            s = np.atleast_1d(s)
        probs = self.model.predict_probs(x, s)
        correction = self.lam.lambda1 - self.lam.lambda2
        return self.proportions.gather(s)[:, None] * probs - s[:, None] * correction[None, :]

    def predict(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Predicted class labels in 1..K for a batch (or a single row)."""
        single = np.asarray(x).ndim == 1
        # np.argmax returns the first maximal index, which is the smallest class
        pred = self.scores(x, s).argmax(axis=1) + 1
        return pred[0] if single else pred


def predict(g: FairClassifier, x: np.ndarray, s) -> np.ndarray:
    """Functional alias for FairClassifier.predict."""
    return g.predict(x, np.asarray(s))
