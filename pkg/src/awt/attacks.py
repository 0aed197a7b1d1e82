"""Iterative lp adversarial attacks (PGD) against dense or masked networks.

Each step ascends the per-example loss in x: sign of the input gradient for
l-inf, normalized gradient for l2.  Steps are lp-bounded by the step size
and the cumulative perturbation is projected back into the eps ball after
every step; an optional clip box is enforced after every step as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .network import MlpSpec, batch_backprop
from .numerics import lp_project, make_rng

__all__ = ["AttackConfig", "iterative_attack", "eval_attack_config"]


@dataclass(frozen=True)
class AttackConfig:
    """lp iterative-attack description.

    norm_order: 2 or inf; epsilon: total budget; steps: iteration count;
    step_size: per-step lp budget; clip_box: optional (lo, hi) coordinate
    bounds; random_start: uniform draw in the eps ball before the first
    step; seed: RNG stream for the random start.
    """

    norm_order: float
    epsilon: float
    steps: int
    step_size: float
    clip_box: Optional[tuple[float, float]] = None
    random_start: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.norm_order not in (2, math.inf):
            raise ValueError(f"unsupported attack norm order {self.norm_order!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size < 0:
            raise ValueError("step_size must be >= 0")

    @property
    def lemma_compatible(self) -> bool:
        """Whether steps * step_size <= 2 * epsilon."""
        return self.steps * self.step_size <= 2.0 * self.epsilon + 1e-12

    def with_seed(self, seed: int) -> "AttackConfig":
        return replace(self, seed=seed)


def eval_attack_config(epsilon: float, clip_box=(0.0, 1.0)) -> AttackConfig:
    """Robustness-evaluation protocol: l-inf, 100 iterations, step 2.5*eps/100."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return AttackConfig(norm_order=math.inf, epsilon=epsilon, steps=100,
                        step_size=2.5 * epsilon / 100.0, clip_box=clip_box,
                        random_start=True)


def _random_start(cfg: AttackConfig, shape, rng: np.random.Generator) -> np.ndarray:
    n, d = shape
    if cfg.norm_order == math.inf:
        return rng.uniform(-cfg.epsilon, cfg.epsilon, size=shape)
    dirs = rng.normal(size=shape)
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    radii = cfg.epsilon * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return dirs * radii


def iterative_attack(spec: MlpSpec, theta: np.ndarray, X: np.ndarray, Y,
                     loss: str, cfg: AttackConfig,
                     mask: Optional[np.ndarray] = None,
                     rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Adversarial batch for (possibly masked) parameters theta.

    Returns X_adv with ||x_adv - x||_p <= epsilon per example.  A zero input
    gradient yields a zero step for that example.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if cfg.epsilon == 0.0 or cfg.step_size == 0.0:
        return X.copy()
    if rng is None:
        rng = make_rng(cfg.seed)

    delta = np.zeros_like(X)
    if cfg.random_start:
        delta = _random_start(cfg, X.shape, rng)
        delta = _project_all(delta, cfg)
        if cfg.clip_box is not None:
            delta = np.clip(X + delta, *cfg.clip_box) - X

    for _ in range(cfg.steps):
        _, _, G = batch_backprop(spec, theta, X + delta, Y, loss, mask)
        if cfg.norm_order == math.inf:
            step = cfg.step_size * np.sign(G)
        else:
            norms = np.linalg.norm(G, axis=1, keepdims=True)
            step = np.where(norms > 0, cfg.step_size * G / np.maximum(norms, 1e-300), 0.0)
        delta = _project_all(delta + step, cfg)
        if cfg.clip_box is not None:
            delta = np.clip(X + delta, *cfg.clip_box) - X
    return X + delta


def _project_all(delta: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    if cfg.norm_order == math.inf:
        return np.clip(delta, -cfg.epsilon, cfg.epsilon)
    out = np.empty_like(delta)
    for i in range(delta.shape[0]):
        out[i] = lp_project(delta[i], 2, cfg.epsilon)
    return out
