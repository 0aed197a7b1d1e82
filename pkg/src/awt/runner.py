"""Subcommand implementations behind the CLI.

Artifacts written into the output directory:
  mask.ckpt          initialization + searched mask        (awt-search, run)
  trained.ckpt       phase-two trained parameters          (train, run)
  search_trace.csv   mask-search objective trace           (awt-search, run)
  training_trace.csv per-epoch training metrics            (train, run)
  eval_summary.csv   clean/robust accuracy                 (eval, run)
  toy_table.csv      toy-experiment table                  (toy, gaussian_toy run)
  bounds.csv         per-epoch dynamics-gap bound records  (bounds)
  ntk.kernel         binary kernel dump                    (ntk)

Every CSV starts with a `# seed=... config_hash=...` stamp.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .analysis import (GaussianToySpec, check_lemma_bound, check_theorem_bound,
                       estimate_derivative_bounds, paired_adversarial_run,
                       run_toy_experiment)
from .attacks import AttackConfig, eval_attack_config
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig
from .data import (blobs, gaussian_toy, load_mnist_idx, subset_indices,
                   xor_dataset)
from .kernels import empirical_ntk, save_kernel
from .metrics import MetricsTrace, emit_metrics
from .network import effective_params, init_params, magnitude_mask
from .numerics import make_rng, spawn_rng
from .search import awt_search
from .training import TrainConfig, adversarial_train, evaluate, natural_train

__all__ = ["dispatch"]


def _stamp(cfg: ExperimentConfig) -> str:
    return f"seed={cfg.seed} config_hash={cfg.config_hash}"


def _out_dir(cfg: ExperimentConfig, args) -> str:
    out = args.out if getattr(args, "out", None) else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def _apply_seed(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is None:
        return cfg
    from dataclasses import replace
    seed = args.seed
    return replace(cfg, seed=seed, search=replace(cfg.search, seed=seed),
                   train=replace(cfg.train, seed=seed))


def _datasets(cfg: ExperimentConfig):
    """((X_train, y_train), (X_test, y_test)) for the configured dataset."""
    if cfg.dataset in ("mnist", "mnist_subset"):
        X, y = load_mnist_idx(cfg.mnist_images, cfg.mnist_labels)
        if cfg.dataset == "mnist":
            n_train = int(0.8 * X.shape[0])
            n_test = X.shape[0] - n_train
        else:
            n_train, n_test = cfg.subset_train, cfg.subset_test
        idx = subset_indices(X.shape[0], min(n_train + n_test, X.shape[0]),
                             cfg.seed)
        order = spawn_rng(cfg.seed, 2).permutation(idx.size)
        idx = idx[order]
        tr, te = idx[:n_train], idx[n_train:n_train + n_test]
        return (X[tr], y[tr]), (X[te], y[te])
    if cfg.dataset == "gaussian_toy":
        toy = _toy_spec(cfg)
        return toy.sample(stream=0), toy.sample(stream=1)
    if cfg.dataset == "blobs":
        return (blobs(cfg.blob_n, cfg.seed),
                blobs(cfg.blob_n, cfg.seed + 1))
    if cfg.dataset == "xor":
        data = xor_dataset()
        return data, data
    raise ConfigError(f"unknown dataset {cfg.dataset!r}")


def _toy_spec(cfg: ExperimentConfig) -> GaussianToySpec:
    return GaussianToySpec(dimension=cfg.toy_dim, mu_scale=cfg.toy_mu,
                           sigma=cfg.toy_sigma, n_samples=cfg.toy_n,
                           epsilon=cfg.eval_epsilon, seed=cfg.seed)


def _check_model(cfg: ExperimentConfig, train) -> None:
    X, y = train
    if cfg.model.n_in != X.shape[1]:
        raise ConfigError(f"model input size {cfg.model.n_in} does not match "
                          f"dataset width {X.shape[1]}")


def _search_targets(cfg: ExperimentConfig, y):
    """Targets handed to the search attack, shaped for its loss kind."""
    if cfg.search.attack_loss == "cross_entropy":
        return np.asarray(y, dtype=np.int64)
    y = np.asarray(y)
    if y.ndim == 1 and cfg.model.n_out > 1:
        onehot = np.zeros((y.shape[0], cfg.model.n_out))
        onehot[np.arange(y.shape[0]), y.astype(np.int64)] = 1.0
        return onehot
    return np.asarray(y, dtype=np.float64).reshape(-1, cfg.model.n_out)


def _eval_attack(cfg: ExperimentConfig) -> AttackConfig:
    clip = (0.0, 1.0) if cfg.dataset in ("mnist", "mnist_subset") else None
    base = eval_attack_config(cfg.eval_epsilon, clip_box=clip)
    if cfg.eval_norm != math.inf:
        from dataclasses import replace
        base = replace(base, norm_order=cfg.eval_norm)
    return base


def _run_search(cfg: ExperimentConfig, out: str, train):
    X, y = train
    theta0 = init_params(cfg.model, make_rng(cfg.seed))
    mask, trace = awt_search(cfg.model, theta0, (X, _search_targets(cfg, y)),
                             cfg.search)
    save_checkpoint(Checkpoint(cfg.model, theta0, mask, cfg.seed,
                               cfg.config_hash, "mask-search"),
                    os.path.join(out, "mask.ckpt"))
    emit_metrics(trace, os.path.join(out, "search_trace.csv"), _stamp(cfg))
    print(f"mask search done: final total {trace.last('total'):.6g}; "
          f"artifacts in {out}")
    return theta0, mask, trace


def _run_train(cfg: ExperimentConfig, out: str, train, theta0, mask):
    params0 = effective_params(cfg.model, theta0, mask)
    if cfg.train.attack is not None:
        params, trace = adversarial_train(cfg.model, params0, mask, train,
                                          cfg.train)
    else:
        params, trace = natural_train(cfg.model, params0, mask, train,
                                      cfg.train)
    save_checkpoint(Checkpoint(cfg.model, params, mask, cfg.seed,
                               cfg.config_hash, "trained"),
                    os.path.join(out, "trained.ckpt"))
    emit_metrics(trace, os.path.join(out, "training_trace.csv"), _stamp(cfg))
    print(f"training done: final train loss {trace.last('train_loss'):.6g}")
    return params, trace


def _write_eval(cfg: ExperimentConfig, out: str, clean: float, robust):
    path = os.path.join(out, "eval_summary.csv")
    with open(path, "w") as fh:
        fh.write(f"# {_stamp(cfg)}\n")
        fh.write("clean_acc,robust_acc,epsilon\n")
        rob = "" if robust is None else "%.9g" % robust
        fh.write(f"{clean:.9g},{rob},{cfg.eval_epsilon:.9g}\n")
    print(f"clean acc {clean:.4f}" +
          ("" if robust is None else f", robust acc {robust:.4f} "
                                     f"(eps={cfg.eval_epsilon})"))


def _write_toy(cfg: ExperimentConfig, out: str, rows) -> None:
    path = os.path.join(out, "toy_table.csv")
    with open(path, "w") as fh:
        fh.write(f"# {_stamp(cfg)}\n")
        fh.write("name,acc,angle,cos,rob,acc_analytic,rob_analytic\n")
        for r in rows:
            fh.write(f"{r.name},{r.acc:.9g},{r.angle:.9g},{r.cos:.9g},"
                     f"{r.rob:.9g},{r.acc_analytic:.9g},{r.rob_analytic:.9g}\n")
    for r in rows:
        print(f"{r.name:8s} acc {r.acc:.3f}  cos {r.cos:.3f}  "
              f"rob {r.rob:.3f}  rob(analytic) {r.rob_analytic:.3f}")


def dispatch(command: str, cfg: ExperimentConfig, args) -> int:
    cfg = _apply_seed(cfg, args)
    out = _out_dir(cfg, args)

    if command == "toy":
        rows = run_toy_experiment(_toy_spec(cfg), cfg.density)
        _write_toy(cfg, out, rows)
        return 0

    train_set, test_set = _datasets(cfg)
    _check_model(cfg, train_set)

    if command == "awt-search":
        _run_search(cfg, out, train_set)
        return 0

    if command == "train":
        mask_path = args.mask or os.path.join(out, "mask.ckpt")
        if os.path.exists(mask_path):
            ck = load_checkpoint(mask_path)
            theta0, mask = ck.params, ck.mask
        else:
            theta0 = init_params(cfg.model, make_rng(cfg.seed))
            mask = None
        _run_train(cfg, out, train_set, theta0, mask)
        return 0

    if command == "eval":
        ck = load_checkpoint(args.checkpoint)
        clean, robust = evaluate(ck.spec, ck.params, ck.mask, test_set,
                                 _eval_attack(cfg))
        _write_eval(cfg, out, clean, robust)
        return 0

    if command == "ntk":
        theta0 = init_params(cfg.model, make_rng(cfg.seed))
        X = train_set[0][:args.batch]
        save_kernel(empirical_ntk(cfg.model, theta0, X),
                    os.path.join(out, "ntk.kernel"))
        print(f"wrote {os.path.join(out, 'ntk.kernel')}")
        return 0

    if command == "bounds":
        return _run_bounds(cfg, out, train_set, test_set)

    if command == "run":
        theta0, mask, _ = _run_search(cfg, out, train_set)
        _run_train(cfg, out, train_set, theta0, mask)
        ck = load_checkpoint(os.path.join(out, "trained.ckpt"))
        clean, robust = evaluate(ck.spec, ck.params, ck.mask, test_set,
                                 _eval_attack(cfg))
        _write_eval(cfg, out, clean, robust)
        if cfg.dataset == "gaussian_toy":
            rows = run_toy_experiment(_toy_spec(cfg), cfg.density)
            _write_toy(cfg, out, rows)
        return 0

    raise ConfigError(f"unknown command {command!r}")


def _run_bounds(cfg: ExperimentConfig, out: str, train_set, test_set) -> int:
    """Lemma check on attacked test points plus the dynamics-gap bound on a
    paired dense/sparse adversarial run."""
    from .attacks import iterative_attack
    from .objective import awt_loss

    eps = cfg.eval_epsilon
    X, y = train_set
    Xt, yt = test_set
    theta0 = init_params(cfg.model, make_rng(cfg.seed))

    steps = 40
    attack = AttackConfig(norm_order=cfg.eval_norm, epsilon=eps, steps=steps,
                          step_size=2.0 * eps / steps)
    tcfg = TrainConfig(loss=cfg.train.loss, optimizer=cfg.train.optimizer,
                       learning_rate=min(cfg.train.learning_rate,
                                         1.0 / cfg.train.epochs),
                       epochs=cfg.train.epochs, batch_size=cfg.train.batch_size,
                       attack=attack, seed=cfg.seed)
    params, _ = adversarial_train(cfg.model, theta0, None, train_set, tcfg)

    targets = _search_targets(cfg, yt)
    loss_kind = ("cross_entropy" if cfg.train.loss == "cross_entropy"
                 else "squared")
    Xadv = iterative_attack(cfg.model, params, Xt, targets
                            if loss_kind != "cross_entropy"
                            else np.asarray(yt, dtype=np.int64),
                            loss_kind, attack)
    p = cfg.eval_norm
    sample = np.concatenate([Xt, Xadv])[: 2 * min(500, Xt.shape[0])]
    dbounds = estimate_derivative_bounds(cfg.model, params, sample, p, eps)
    lemma = check_lemma_bound(cfg.model, params, Xt, Xadv, dbounds, eps,
                              attack=attack)

    mask = magnitude_mask(cfg.model, theta0, cfg.density)
    sloss = awt_loss(cfg.model, theta0, theta0, mask, X[:cfg.search.batch_size],
                     _search_targets(cfg, y)[:cfg.search.batch_size], cfg.search)
    alpha = math.sqrt(sloss.total)
    outs_d, outs_s = paired_adversarial_run(cfg.model, theta0, mask, train_set,
                                            tcfg, Xt)
    report = check_theorem_bound(outs_d, outs_s, alpha, eps, dbounds)

    path = os.path.join(out, "bounds.csv")
    with open(path, "w") as fh:
        fh.write(f"# {_stamp(cfg)}\n")
        fh.write("epoch,lhs,rhs\n")
        for t, lhs, rhs in report.records:
            fh.write(f"{t},{lhs:.9g},{rhs:.9g}\n")
    print(f"lemma: max deviation {lemma.max_deviation:.6g} vs bound "
          f"{lemma.bound:.6g} -> {'holds' if lemma.holds else 'VIOLATED'}")
    print(f"dynamics gap bound {'holds' if report.holds else 'VIOLATED'} "
          f"over {report.stop_time} epochs (alpha={alpha:.4g})")
    return 0
