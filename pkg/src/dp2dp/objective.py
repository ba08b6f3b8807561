"""Smoothed objective for the parity post-processing step.

The max over classes is smoothed by a temperature-beta log-sum-exp, whose
gradient is the matching softmax.  The per-sample loss combines the
smoothed, proportion-corrected class scores with a linear slack
regularizer; its closed-form gradient is what the noisy SGD consumes.

All functions accept a single sample (1-d score/probability vectors) or a
batch (leading axis), and are pure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    GROUPS,
    LagrangeParams,
    PrivatizedProportions,
    ProbabilityModel,
    UnlabeledDataset,
    partition_by_group,
)
from .errors import ConfigError, DataError

N_GROUPS = len(GROUPS)  # |S| = 2


@dataclass(frozen=True)
class SmoothingParams:
    """Smoothing temperature beta and target unfairness level rho."""

    beta: float
    rho: float = 0.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.rho < 0:
            raise ConfigError("rho must be nonnegative")


def lse_beta(z: np.ndarray, beta: float) -> np.ndarray:
    """Temperature-beta log-sum-exp along the last axis.

    Computed with max subtraction, so max(z) <= lse <= max(z) + beta log K
    holds without overflow for arbitrarily large scores.
    """
    if beta <= 0:
        raise ConfigError("beta must be positive")
    z = np.asarray(z, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    out = m[..., 0] + beta * np.log(np.exp((z - m) / beta).sum(axis=-1))
    return out if out.ndim else float(out)


def softmax_beta(z: np.ndarray, beta: float) -> np.ndarray:
    """Gradient of lse_beta: softmax of z / beta along the last axis."""
    if beta <= 0:
        raise ConfigError("beta must be positive")
    z = np.asarray(z, dtype=np.float64)
    e = np.exp((z - z.max(axis=-1, keepdims=True)) / beta)
    return e / e.sum(axis=-1, keepdims=True)


def corrected_scores(
    probs: np.ndarray,
    s: int | np.ndarray,
    pi_bar: float | np.ndarray,
    lam: LagrangeParams,
) -> np.ndarray:
    """Proportion-weighted probabilities with the signed dual correction:
    pi_bar * p_k - s * (lambda1_k - lambda2_k), componentwise."""
    probs = np.asarray(probs, dtype=np.float64)
    correction = lam.lambda1 - lam.lambda2
    s_arr = np.asarray(s, dtype=np.float64)
    pi_arr = np.asarray(pi_bar, dtype=np.float64)
    if probs.ndim == 1:
        return pi_arr * probs - s_arr * correction
    s_arr = np.broadcast_to(s_arr, probs.shape[:1])
    pi_arr = np.broadcast_to(pi_arr, probs.shape[:1])
    return pi_arr[:, None] * probs - s_arr[:, None] * correction[None, :]


def per_sample_loss(
    lam: LagrangeParams,
    probs: np.ndarray,
    s: int | np.ndarray,
    pi_bar: float | np.ndarray,
    params: SmoothingParams,
) -> float | np.ndarray:
    """Smoothed per-sample loss:
    2 lse_beta(corrected scores) + rho * sum(lambda1 + lambda2)."""
    scores = corrected_scores(probs, s, pi_bar, lam)
    reg = params.rho * (lam.lambda1.sum() + lam.lambda2.sum())
    return N_GROUPS * lse_beta(scores, params.beta) + reg


def per_sample_grad(
    lam: LagrangeParams,
    probs: np.ndarray,
    s: int | np.ndarray,
    pi_bar: float | np.ndarray,
    params: SmoothingParams,
) -> np.ndarray:
    """Closed-form gradient of per_sample_loss in the stacked (2K,) layout.

    Block 1 (lambda1): -2 s softmax + rho; block 2 (lambda2): +2 s softmax
    + rho.  For batched inputs the result is (n, 2K).
    """
    scores = corrected_scores(probs, s, pi_bar, lam)
    sm = softmax_beta(scores, params.beta)
    s_arr = np.asarray(s, dtype=np.float64)
    if sm.ndim == 1:
        g1 = -N_GROUPS * s_arr * sm + params.rho
        g2 = N_GROUPS * s_arr * sm + params.rho
        return np.concatenate([g1, g2])
    signed = N_GROUPS * np.broadcast_to(s_arr, sm.shape[:1])[:, None] * sm
    g1 = -signed + params.rho
    g2 = signed + params.rho
    return np.concatenate([g1, g2], axis=1)


def objective_H(
    lam: LagrangeParams,
    pool: UnlabeledDataset,
    model: ProbabilityModel,
    pi: PrivatizedProportions,
    params: SmoothingParams,
) -> float:
    """Group-balanced empirical objective: mean over groups of the
    within-group average per-sample loss."""
    groups = partition_by_group(pool)
    total = 0.0
    for s in GROUPS:
        xs = groups[s]
        if len(xs) == 0:
            raise DataError(f"group s={s:+d} is empty; the objective is undefined")
        probs = model.predict_probs(xs, np.full(len(xs), s))
        total += float(np.mean(per_sample_loss(lam, probs, s, pi[s], params)))
    return total / N_GROUPS


def objective_grad(
    lam: LagrangeParams,
    pool: UnlabeledDataset,
    model: ProbabilityModel,
    pi: PrivatizedProportions,
    params: SmoothingParams,
) -> np.ndarray:
    """Gradient of objective_H: group-balanced average of per_sample_grad."""
    groups = partition_by_group(pool)
    total = np.zeros(2 * lam.n_classes)
    for s in GROUPS:
        xs = groups[s]
        if len(xs) == 0:
            raise DataError(f"group s={s:+d} is empty; the objective is undefined")
        probs = model.predict_probs(xs, np.full(len(xs), s))
        total += per_sample_grad(lam, probs, s, pi[s], params).mean(axis=0)
    return total / N_GROUPS
