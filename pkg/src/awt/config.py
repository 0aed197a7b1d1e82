"""INI experiment configuration.

Sections:
  [experiment]  dataset, model (comma-separated layer sizes), seed, out_dir,
                eval_epsilon, eval_norm, plus dataset options
                (mnist_images/mnist_labels paths, subset_train/subset_test,
                toy_dim/toy_n/toy_mu/toy_sigma, blob_n)
  [search]      mask-search settings (AwtConfig fields plus the attack:
                attack_norm, attack_epsilon, attack_steps, attack_step_size,
                attack_clip)
  [train]       phase-two training (TrainConfig fields plus attack_epsilon,
                attack_steps, attack_warmup_epochs; attack_epsilon > 0 means
                adversarial training)

Exact keys and defaults are documented in the README.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import os
from dataclasses import dataclass
from typing import Optional

from .attacks import AttackConfig
from .network import MlpSpec
from .objective import AwtConfig
from .training import TrainConfig, train_attack_config

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]

DATASETS = ("mnist", "mnist_subset", "gaussian_toy", "blobs", "xor")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    model: MlpSpec
    search: AwtConfig
    train: TrainConfig
    eval_epsilon: float
    eval_norm: float
    out_dir: str
    seed: int
    config_hash: str
    # dataset options
    mnist_images: Optional[str] = None
    mnist_labels: Optional[str] = None
    subset_train: int = 1000
    subset_test: int = 1000
    toy_dim: int = 100
    toy_n: int = 5000
    toy_mu: float = 3.0
    toy_sigma: float = 1.0
    blob_n: int = 200
    density: float = 0.1


def _norm_order(text: str) -> float:
    if text in ("inf", "linf", "l_inf"):
        return math.inf
    if text in ("2", "l2"):
        return 2.0
    raise ConfigError(f"unsupported norm {text!r} (use inf or 2)")


def _attack_from(section, prefix: str, default_eps: float,
                 clip_default: bool) -> Optional[AttackConfig]:
    eps = section.getfloat(f"{prefix}epsilon", fallback=default_eps)
    if eps is None:
        return None
    steps = section.getint(f"{prefix}steps", fallback=10)
    step_size = section.getfloat(f"{prefix}step_size",
                                 fallback=2.5 * eps / max(steps, 1))
    norm = _norm_order(section.get(f"{prefix}norm", fallback="inf"))
    clip = section.getboolean(f"{prefix}clip", fallback=clip_default)
    try:
        return AttackConfig(norm_order=norm, epsilon=eps, steps=steps,
                            step_size=step_size,
                            clip_box=(0.0, 1.0) if clip else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    """Parse and validate; raises ConfigError on any invalid value and
    checks that referenced data files exist."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    config_hash = hashlib.sha256(raw).hexdigest()[:12]

    parser = configparser.ConfigParser()
    try:
        parser.read_string(raw.decode())
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None

    try:
        exp = parser["experiment"] if parser.has_section("experiment") else parser["DEFAULT"]
        dataset = exp.get("dataset", fallback="gaussian_toy")
        if dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {dataset!r}")
        model_text = exp.get("model", fallback=None)
        if model_text is None:
            raise ConfigError("missing [experiment] model")
        try:
            model = MlpSpec([int(v) for v in model_text.replace(" ", "").split(",")])
        except ValueError as exc:
            raise ConfigError(f"bad model spec {model_text!r}: {exc}") from None
        seed = exp.getint("seed", fallback=0)
        out_dir = exp.get("out_dir", fallback="runs")
        eval_epsilon = exp.getfloat("eval_epsilon", fallback=0.3)
        eval_norm = _norm_order(exp.get("eval_norm", fallback="inf"))

        mnist_images = exp.get("mnist_images", fallback=None)
        mnist_labels = exp.get("mnist_labels", fallback=None)
        if dataset in ("mnist", "mnist_subset"):
            if not mnist_images or not mnist_labels:
                raise ConfigError("mnist datasets need mnist_images and "
                                  "mnist_labels paths")
            for key, p in (("mnist_images", mnist_images),
                           ("mnist_labels", mnist_labels)):
                if not os.path.exists(p):
                    raise ConfigError(f"{key} path does not exist: {p}")

        clip_default = dataset in ("mnist", "mnist_subset")
        s = parser["search"] if parser.has_section("search") else exp
        density = s.getfloat("density", fallback=exp.getfloat("density", fallback=0.1))
        attack = _attack_from(s, "attack_", default_eps=eval_epsilon,
                              clip_default=clip_default)
        try:
            search = AwtConfig(
                density=density,
                attack=attack,
                kernel_weight=s.getfloat("kernel_weight", fallback=1e-3),
                weight_decay=s.getfloat("weight_decay", fallback=1e-4),
                mask_update_every=s.getint("mask_update_every", fallback=1),
                learning_rate=s.getfloat("learning_rate", fallback=5e-4),
                epochs=s.getint("epochs", fallback=20),
                batch_size=s.getint("batch_size", fallback=64),
                kernel_mode=s.get("kernel_mode", fallback="full"),
                optimizer=s.get("optimizer", fallback="adam"),
                attack_loss=s.get("attack_loss", fallback="squared"),
                frozen_sparse_attacks=s.getboolean("frozen_sparse_attacks",
                                                   fallback=False),
                seed=seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

        t = parser["train"] if parser.has_section("train") else exp
        train_eps = t.getfloat("attack_epsilon", fallback=eval_epsilon)
        if train_eps > 0:
            train_attack = train_attack_config(
                train_eps, steps=t.getint("attack_steps", fallback=40),
                clip_box=(0.0, 1.0) if clip_default else None)
        else:
            train_attack = None
        try:
            train = TrainConfig(
                loss=t.get("loss", fallback="cross_entropy"),
                optimizer=t.get("optimizer", fallback="adam"),
                learning_rate=t.getfloat("learning_rate", fallback=1e-3),
                epochs=t.getint("epochs", fallback=100),
                batch_size=t.getint("batch_size", fallback=64),
                attack=train_attack,
                attack_warmup_epochs=t.getint("attack_warmup_epochs",
                                              fallback=0),
                seed=seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

        return ExperimentConfig(
            dataset=dataset, model=model, search=search, train=train,
            eval_epsilon=eval_epsilon, eval_norm=eval_norm,
            out_dir=out_dir, seed=seed, config_hash=config_hash,
            mnist_images=mnist_images, mnist_labels=mnist_labels,
            subset_train=exp.getint("subset_train", fallback=1000),
            subset_test=exp.getint("subset_test", fallback=1000),
            toy_dim=exp.getint("toy_dim", fallback=100),
            toy_n=exp.getint("toy_n", fallback=5000),
            toy_mu=exp.getfloat("toy_mu", fallback=3.0),
            toy_sigma=exp.getfloat("toy_sigma", fallback=1.0),
            blob_n=exp.getint("blob_n", fallback=200),
            density=density)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
