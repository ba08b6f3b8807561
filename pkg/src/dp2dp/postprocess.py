"""Noisy projected SGD that recalibrates a probability model for parity.

The run privatizes the group proportions with Gaussian noise, then walks
the box-constrained dual variables with minibatch gradients of the
smoothed objective, one Gaussian vector added inside the batch sum per
iteration.  The final iterate, the noisy proportions, and the Phase-1
model assemble the released classifier.

Privacy plumbing: the pool is read exactly twice per run, once for the
one-pass frequency count and once per minibatch gradient; the trace
stores no raw features.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import (
    GROUPS,
    FairClassifier,
    LagrangeParams,
    PrivatizedProportions,
    ProbabilityModel,
    UnlabeledDataset,
    partition_by_group,
)
from .errors import ConfigError, DataError, NumericError
from .objective import SmoothingParams, per_sample_loss, per_sample_grad

PROBE_ROWS_PER_GROUP = 32


@dataclass(frozen=True)
class ConstantStep:
    """eta_t = eta; the accounting theory assumes eta <= 2 beta."""

    eta: float

    def at(self, t: int, ctx: "Dp2dpConfig") -> float:
        return self.eta


@dataclass(frozen=True)
class InverseSqrtStep:
    """eta_t = eta0 / sqrt(t); the experimental default."""

    eta0: float = 1.0

    def at(self, t: int, ctx: "Dp2dpConfig") -> float:
        return self.eta0 / np.sqrt(t)


@dataclass(frozen=True)
class UtilityStep:
    """eta_t = D / sqrt(t (L^2 + sigma^2 p / b^2)) with D the box diameter,
    L the per-sample Lipschitz constant and p = 2K; the schedule under
    which the utility analysis is stated."""

    n_classes: int

    def at(self, t: int, ctx: "Dp2dpConfig") -> float:
        k = self.n_classes
        diameter = np.sqrt(2 * k) * ctx.c_lambda
        lipschitz = 2 * np.sqrt(2) + ctx.rho * np.sqrt(2 * k)
        denom = t * (lipschitz**2 + ctx.sigma_sgd**2 * 2 * k / ctx.b**2)
        return diameter / np.sqrt(denom)


StepSchedule = Union[ConstantStep, InverseSqrtStep, UtilityStep]


@dataclass(frozen=True)
class Dp2dpConfig:
    """Run parameters for the post-processing optimizer."""

    rho: float
    beta: float
    T: int
    b: int
    eta_schedule: StepSchedule
    sigma_pi: float
    sigma_sgd: float
    c_lambda: float
    seed: int

    def __post_init__(self):
        if self.rho < 0 or self.beta <= 0:
            raise ConfigError("need rho >= 0 and beta > 0")
        if self.T < 1 or self.b < 1:
            raise ConfigError("T and b must be at least 1")
        if self.sigma_pi < 0 or self.sigma_sgd < 0:
            raise ConfigError("noise scales must be nonnegative")
        if self.c_lambda <= 0:
            raise ConfigError("c_lambda must be positive")
        if isinstance(self.eta_schedule, ConstantStep) and self.eta_schedule.eta > 2 * self.beta:
            # the privacy theory covers constant steps only up to 2 beta;
            # the run proceeds, but the bound may not apply
            warnings.warn(
                f"constant step {self.eta_schedule.eta:g} exceeds 2 beta = "
                f"{2 * self.beta:g}; the constant-step privacy bound does not cover it",
                stacklevel=2,
            )


@dataclass(frozen=True)
class RunTrace:
    """Per-iteration record of the optimizer path (no raw features)."""

    t: np.ndarray  # (T,) iteration index, 1-based
    lam: np.ndarray  # (T, 2K) iterate after the step
    probe_objective: np.ndarray  # (T,) objective on the fixed probe subsample
    noise_seed: np.ndarray  # (T,) per-iteration gradient-noise seed

    def write_csv(self, path) -> None:
        k2 = self.lam.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"lambda_{i}" for i in range(k2)]
                       + ["probe_objective", "noise_seed"])
            for i in range(len(self.t)):
                w.writerow([int(self.t[i])]
                           + [format(v, ".12g") for v in self.lam[i]]
                           + [format(self.probe_objective[i], ".12g"),
                              int(self.noise_seed[i])])


def project_box(v: np.ndarray, c_lambda: float) -> np.ndarray:
    """Euclidean projection onto [0, c_lambda]^d: a componentwise clamp."""
    if c_lambda <= 0:
        raise ConfigError("c_lambda must be positive")
    return np.clip(v, 0.0, c_lambda)


def privatize_proportions(
    pool: UnlabeledDataset, sigma_pi: float, rng: np.random.Generator
) -> PrivatizedProportions:
    """Empirical group frequencies plus independent N(0, sigma_pi^2) noise.

    Noise draws are consumed in fixed group order (-1 then +1) so a seeded
    generator reproduces the release exactly.
    """
    if sigma_pi < 0:
        raise ConfigError("sigma_pi must be nonnegative")
    out = {}
    for s in GROUPS:
        hat = float(np.mean(pool.s == s))
        out[s] = hat + sigma_pi * float(rng.standard_normal())
    return PrivatizedProportions(out)


def sample_minibatch(
    groups: dict[int, np.ndarray], b: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw b rows: group uniform on {-1, +1}, then a row uniform within
    the chosen group, with replacement.

    A record in a singleton group is therefore drawn with probability 1/2
    per slot regardless of the other group's size.
    """
    for s in GROUPS:
        if len(groups.get(s, ())) == 0:
            raise DataError(f"cannot sample: group s={s:+d} is empty")
    sb = 2 * rng.integers(0, 2, size=b) - 1
    d = groups[GROUPS[0]].shape[1]
    xb = np.empty((b, d))
    for s in GROUPS:
        mask = sb == s
        take = int(mask.sum())
        if take:
            idx = rng.integers(0, len(groups[s]), size=take)
            xb[mask] = groups[s][idx]
    return xb, sb


def run_dp2dp(
    pool: UnlabeledDataset,
    model: ProbabilityModel,
    cfg: Dp2dpConfig,
) -> tuple[FairClassifier, RunTrace]:
    """Run the full post-processing: privatized proportions, T noisy
    projected-SGD steps from lambda = 0, final classifier from the last
    iterate.

    All randomness derives from cfg.seed through three named streams
    (proportion noise, batch sampling, per-step gradient noise), so equal
    inputs give bit-identical outputs.
    """
    k = model.n_classes
    groups = partition_by_group(pool)
    for s in GROUPS:
        if len(groups[s]) == 0:
            raise DataError(f"group s={s:+d} is empty; the run is undefined")

    root = np.random.SeedSequence(cfg.seed)
    pi_ss, batch_ss, noise_ss = root.spawn(3)
    pi_bar = privatize_proportions(pool, cfg.sigma_pi, np.random.default_rng(pi_ss))
    batch_rng = np.random.default_rng(batch_ss)
    noise_seeds = np.random.default_rng(noise_ss).integers(0, 2**63, size=cfg.T)

    # model evaluations are pure, so probabilities are cached per group
    probs = {s: model.predict_probs(groups[s], np.full(len(groups[s]), s))
             for s in GROUPS}
    probe = {s: probs[s][:PROBE_ROWS_PER_GROUP] for s in GROUPS}

    smoothing = SmoothingParams(beta=cfg.beta, rho=cfg.rho)
    lam_vec = np.zeros(2 * k)
    trace_lam = np.empty((cfg.T, 2 * k))
    trace_obj = np.empty(cfg.T)

    for t in range(1, cfg.T + 1):
        lam = LagrangeParams.from_vector(lam_vec, cfg.c_lambda)
        sb = 2 * batch_rng.integers(0, 2, size=cfg.b) - 1
        pb = np.empty((cfg.b, k))
        piv = np.empty(cfg.b)
        for s in GROUPS:
            mask = sb == s
            take = int(mask.sum())
            if take:
                idx = batch_rng.integers(0, len(groups[s]), size=take)
                pb[mask] = probs[s][idx]
                piv[mask] = pi_bar[s]
        grads = per_sample_grad(lam, pb, sb, piv, smoothing)
        noise = np.random.default_rng(int(noise_seeds[t - 1])).normal(
            0.0, cfg.sigma_sgd, size=2 * k) if cfg.sigma_sgd > 0 else 0.0
        update = (grads.sum(axis=0) + noise) / cfg.b
        if not np.all(np.isfinite(update)):
            raise NumericError(f"non-finite update direction at iteration {t}")
        eta_t = cfg.eta_schedule.at(t, cfg)
        lam_vec = project_box(lam_vec - eta_t * update, cfg.c_lambda)

        trace_lam[t - 1] = lam_vec
        lam_next = LagrangeParams.from_vector(lam_vec, cfg.c_lambda)
        trace_obj[t - 1] = np.mean([
            np.mean(per_sample_loss(lam_next, probe[s], s, pi_bar[s], smoothing))
            for s in GROUPS
        ])

    final = LagrangeParams.from_vector(lam_vec, cfg.c_lambda)
    trace = RunTrace(
        t=np.arange(1, cfg.T + 1),
        lam=trace_lam,
        probe_objective=trace_obj,
        noise_seed=np.asarray(noise_seeds),
    )
    return FairClassifier(model, pi_bar, final), trace
