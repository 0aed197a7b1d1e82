"""Natural and adversarial mini-batch training, plus clean/robust evaluation.

Adversarial training attacks the current (masked) network on each batch,
then takes a descent step on the adversarial batch loss.  Masked
coordinates carry zero gradient, so coordinates that start at zero stay at
exactly zero.  With an epsilon-zero attack the trajectory is identical to
natural training under the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .attacks import AttackConfig, iterative_attack
from .metrics import MetricsTrace
from .network import (LOSS_KINDS, MlpSpec, batch_backprop, effective_params,
                      forward_acts)
from .numerics import make_rng, spawn_rng
from .optim import make_optimizer

__all__ = ["TrainConfig", "natural_train", "adversarial_train", "evaluate",
           "train_attack_config", "predictions", "accuracy"]


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "cross_entropy"
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    attack: Optional[AttackConfig] = None
    attack_warmup_epochs: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.attack_warmup_epochs < 0:
            raise ValueError("attack_warmup_epochs must be >= 0")


def train_attack_config(epsilon: float, steps: int = 40,
                        clip_box=(0.0, 1.0)) -> AttackConfig:
    """Training-time attack: fewer iterations than the evaluation protocol."""
    return AttackConfig(norm_order=math.inf, epsilon=epsilon, steps=steps,
                        step_size=2.5 * epsilon / steps, clip_box=clip_box,
                        random_start=True)


def predictions(spec: MlpSpec, theta, X, mask=None) -> np.ndarray:
    """Predicted labels: argmax over outputs (ties to the lowest class index);
    a single output unit predicts the sign in {-1, +1}."""
    eff = effective_params(spec, theta, mask)
    _, _, F = forward_acts(spec, eff, np.atleast_2d(np.asarray(X, dtype=np.float64)))
    if spec.n_out == 1:
        return np.where(F[:, 0] > 0.0, 1, -1)
    return np.argmax(F, axis=1)


def accuracy(spec: MlpSpec, theta, X, y, mask=None) -> float:
    return float(np.mean(predictions(spec, theta, X, mask) == np.asarray(y)))


def _loss_targets(spec: MlpSpec, y, kind: str):
    """Targets in the form the loss expects: one-hot (or raw reals) for
    squared loss, integer labels for cross-entropy."""
    y = np.asarray(y)
    if kind == "cross_entropy":
        return y.astype(np.int64)
    if y.ndim == 1 and spec.n_out > 1 and np.issubdtype(y.dtype, np.integer):
        onehot = np.zeros((y.shape[0], spec.n_out))
        onehot[np.arange(y.shape[0]), y] = 1.0
        return onehot
    return y.astype(np.float64).reshape(-1, spec.n_out)


def _labels_for_accuracy(spec: MlpSpec, y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim == 2:
        return np.argmax(y, axis=1)
    if spec.n_out == 1:
        return np.where(np.asarray(y, dtype=np.float64).ravel() > 0, 1, -1)
    return y.astype(np.int64)


def _train(spec: MlpSpec, params0, mask, data, cfg: TrainConfig,
           attack: Optional[AttackConfig]):
    X_all = np.asarray(data[0], dtype=np.float64)
    y_all = np.asarray(data[1])
    n = X_all.shape[0]
    if n == 0:
        raise ValueError("empty training set")

    theta = np.asarray(params0, dtype=np.float64).copy()
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    rng = make_rng(cfg.seed)
    attack_rng = spawn_rng(cfg.seed, 1)
    trace = MetricsTrace()

    adversarial = attack is not None and attack.epsilon > 0.0
    for epoch in range(cfg.epochs):
        if adversarial and cfg.attack_warmup_epochs > 0:
            # Linear epsilon ramp: deep nets trained against the full budget
            # from a random init can collapse to a constant classifier, so
            # the budget (and the proportional step size) grows over the
            # first attack_warmup_epochs epochs.
            scale = min(1.0, (epoch + 1) / cfg.attack_warmup_epochs)
            epoch_attack = replace(attack, epsilon=attack.epsilon * scale,
                                   step_size=attack.step_size * scale)
        else:
            epoch_attack = attack
        perm = rng.permutation(n)
        loss_sum = 0.0
        clean_hits = 0
        robust_hits = 0
        count = 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            Xb = X_all[idx]
            yb = _loss_targets(spec, y_all[idx], cfg.loss)
            labels = _labels_for_accuracy(spec, y_all[idx])
            if adversarial:
                Xadv = iterative_attack(spec, theta, Xb, yb, cfg.loss,
                                        epoch_attack, mask=mask, rng=attack_rng)
            else:
                Xadv = Xb
            loss, grad, _ = batch_backprop(spec, theta, Xadv, yb, cfg.loss, mask)
            theta -= opt.step(grad)

            loss_sum += loss * idx.size
            clean_hits += int(np.sum(predictions(spec, theta, Xb, mask) == labels))
            if adversarial:
                robust_hits += int(np.sum(predictions(spec, theta, Xadv, mask) == labels))
            count += idx.size
        metrics = {"train_loss": loss_sum / count, "clean_acc": clean_hits / count}
        if adversarial:
            metrics["robust_acc"] = robust_hits / count
        trace.add(epoch + 1, **metrics)
    return theta, trace


def natural_train(spec: MlpSpec, params0, mask, data, cfg: TrainConfig):
    """Mini-batch descent on the clean loss; returns (params, MetricsTrace)."""
    if cfg.attack is not None:
        raise ValueError("natural_train requires cfg.attack absent")
    return _train(spec, params0, mask, data, cfg, None)


def adversarial_train(spec: MlpSpec, params0, mask, data, cfg: TrainConfig):
    """Mini-batch descent on the adversarial batch loss."""
    if cfg.attack is None:
        raise ValueError("adversarial_train requires cfg.attack")
    return _train(spec, params0, mask, data, cfg, cfg.attack)


def evaluate(spec: MlpSpec, params, mask, data,
             attack: Optional[AttackConfig] = None,
             loss: Optional[str] = None):
    """Clean accuracy, and robust accuracy under the given attack (None when
    no attack is supplied).  The attack maximizes `loss` (default:
    cross-entropy for multi-output networks, squared for a single output).
    """
    X = np.atleast_2d(np.asarray(data[0], dtype=np.float64))
    y = np.asarray(data[1])
    if X.shape[0] == 0:
        raise ValueError("evaluate: empty dataset")
    labels = _labels_for_accuracy(spec, y)
    clean = float(np.mean(predictions(spec, params, X, mask) == labels))
    if attack is None:
        return clean, None
    if loss is None:
        loss = "cross_entropy" if spec.n_out > 1 else "squared"
    yb = _loss_targets(spec, y, loss)
    Xadv = iterative_attack(spec, params, X, yb, loss, attack, mask=mask)
    robust = float(np.mean(predictions(spec, params, Xadv, mask) == labels))
    return clean, robust
