"""Mask search: descend the objective in the student weights, remask by
magnitude every few steps, return the mask.

The anchor network theta0 never changes, so its per-batch adversarial
examples, outputs, and kernel are computed once per batch and cached.  To
make that cache valid across epochs the batch partition is fixed: the data
is shuffled once with the run seed and the same batches are revisited every
epoch.  The student's adversarial batch is regenerated from the current
(w, m) every step; an optional frozen mode generates it once per batch at
first visit instead.
"""

from __future__ import annotations

import numpy as np

from .metrics import MetricsTrace
from .network import MlpSpec, magnitude_mask
from .numerics import make_rng
from .objective import AwtConfig, _objective, _student_attack, dense_reference
from .optim import make_optimizer

__all__ = ["awt_search"]


def awt_search(spec: MlpSpec, theta0: np.ndarray, data, cfg: AwtConfig):
    """Run the mask search; returns (mask, MetricsTrace).

    data is (X, Y) with X of shape (N, n_in); Y is whatever cfg.attack_loss
    expects (targets for squared loss, integer labels for cross-entropy).
    The trace records target_term, kernel_term, and total once every
    cfg.mask_update_every steps (and at the final step).
    """
    X_all = np.asarray(data[0], dtype=np.float64)
    Y_all = np.asarray(data[1])
    n = X_all.shape[0]
    if n == 0:
        raise ValueError("awt_search: empty dataset")

    theta0 = np.asarray(theta0, dtype=np.float64)
    rng = make_rng(cfg.seed)
    perm = rng.permutation(n)
    batches = [perm[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]

    w = theta0.copy()
    m = magnitude_mask(spec, w, cfg.density)
    diagonal = cfg.kernel_mode == "diagonal"
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    trace = MetricsTrace()

    dense_cache: dict[int, tuple] = {}
    frozen_cache: dict[int, np.ndarray] = {}
    total_steps = cfg.epochs * len(batches)
    t = 0
    for _epoch in range(cfg.epochs):
        for bi, idx in enumerate(batches):
            Xb = X_all[idx]
            Yb = Y_all[idx]
            if bi not in dense_cache:
                dense_cache[bi] = dense_reference(spec, theta0, Xb, Yb, cfg)
            Xadv_d, F_d, K_d = dense_cache[bi]

            if cfg.frozen_sparse_attacks:
                if bi not in frozen_cache:
                    frozen_cache[bi] = _student_attack(spec, w, m, Xb, Yb, cfg)
                Xadv_s = frozen_cache[bi]
            else:
                Xadv_s = _student_attack(spec, w, m, Xb, Yb, cfg)

            breakdown, grad = _objective(spec, w, m, Xb, Xadv_s, F_d, K_d,
                                         cfg.kernel_weight, diagonal,
                                         want_grad=True)
            w -= opt.step(grad)
            w -= cfg.weight_decay * (m * w)

            t += 1
            if t % cfg.mask_update_every == 0 or t == total_steps:
                m = magnitude_mask(spec, w, cfg.density)
                if not trace.records or trace.records[-1][0] < t:
                    trace.add(t, target_term=breakdown.target_term,
                              kernel_term=breakdown.kernel_term,
                              total=breakdown.total)
    return m, trace
