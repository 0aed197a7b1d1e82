"""Mask-search objective: target distance plus weighted kernel distance.

The objective compares a frozen dense network theta0 with a masked student
(w, m), each evaluated on its own adversarial batch:

    L = (1/N) ||f_d(Xadv_d) - f_s(Xadv_s)||^2
      + (gamma^2/N^2) ||K_d - K_s||_F^2

with K the mixed tangent kernel between the clean batch and the network's
adversarial batch (full matrix, or its diagonal when kernel_mode is
"diagonal").  Adversarial batches are held fixed when differentiating
(stop-gradient through attack generation); the kernel term's gradient in w
is exact, obtained by adjoint passes through the layered expressions for
the activations and the output/pre-activation sensitivities.

Everything here works on explicit layer tensors:
  A_l   activations, (N, n_l)
  R_l   relu patterns, (N, n_l)
  B_l   df/dz_l sensitivities, (N, k, n_l)
  C_l   masked pairwise activation gram, C_l[x,x',i] = sum_j M_l[i,j] A[x,j] A'[x',j]
and the kernel decomposes as
  K[(x,a),(x',b)] = sum_l sum_i B_l[x,a,i] B'_l[x',b,i] (C_l[x,x',i] + 1)
(the +1 is the bias-coordinate contribution; biases are never pruned).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .attacks import AttackConfig, iterative_attack
from .network import (MlpSpec, backprop_tensors, effective_params,
                      forward_acts, loss_gradient)

__all__ = ["AwtConfig", "AwtLossBreakdown", "awt_loss", "awt_grad",
           "grad_distance_term", "dense_reference"]


@dataclass(frozen=True)
class AwtConfig:
    """Knobs of the mask search (Adam on the student, periodic magnitude remask)."""

    density: float
    attack: AttackConfig
    kernel_weight: float = 1e-3
    weight_decay: float = 1e-4
    mask_update_every: int = 1
    learning_rate: float = 5e-4
    epochs: int = 20
    batch_size: int = 64
    kernel_mode: str = "full"
    optimizer: str = "adam"
    attack_loss: str = "squared"
    frozen_sparse_attacks: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must be in (0,1]")
        if self.kernel_weight < 0 or self.weight_decay < 0:
            raise ValueError("kernel_weight and weight_decay must be >= 0")
        if self.mask_update_every < 1:
            raise ValueError("mask_update_every must be >= 1")
        if self.kernel_mode not in ("full", "diagonal"):
            raise ValueError(f"unknown kernel_mode {self.kernel_mode!r}")
        if self.optimizer not in ("adam", "plain_gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.attack.random_start:
            raise ValueError("mask search requires attack.random_start off")


@dataclass(frozen=True)
class AwtLossBreakdown:
    total: float
    target_term: float
    kernel_term: float


class _Stack:
    """Forward state of one network on one batch."""

    def __init__(self, spec: MlpSpec, theta, mask, X):
        self.eff = effective_params(spec, theta, mask)
        self.layers = spec.split(self.eff)
        self.A, self.R, self.F = forward_acts(spec, self.eff, X)
        self.B = backprop_tensors(spec, self.eff, self.R, X.shape[0])


def _kernel_terms(spec: MlpSpec, st: _Stack, st_adv: _Stack,
                  mask: Optional[np.ndarray], diagonal: bool):
    """Kernel values plus the per-layer C tensors (kept for the adjoint pass).

    Returns (kernel, Cs): kernel is (N,k) of diagonal entries in diagonal
    mode, else (N,k,N,k); Cs[l] is C_{l+1} with full n_l axis (mask of ones
    is substituted when mask is None so the adjoint path stays uniform).
    """
    slices = spec.slices()
    N = st.A[0].shape[0]
    k = spec.n_out
    Cs = []
    kernel = np.zeros((N, k) if diagonal else (N, k, N, k))
    for l, (wsl, _, shape) in enumerate(slices):
        M = None if mask is None else np.asarray(mask)[wsl].reshape(shape)
        if diagonal:
            prod = st.A[l] * st_adv.A[l]
            C = np.broadcast_to((prod.sum(axis=1))[:, None], (N, shape[0])).copy() \
                if M is None else prod @ M.T
            kernel += np.einsum("xai,xai,xi->xa", st.B[l], st_adv.B[l], C + 1.0,
                                optimize=True)
        else:
            prod = st.A[l][:, None, :] * st_adv.A[l][None, :, :]
            C = np.broadcast_to(prod.sum(axis=2)[:, :, None], (N, N, shape[0])).copy() \
                if M is None else np.einsum("xyj,ij->xyi", prod, M, optimize=True)
            kernel += np.einsum("xai,xyi,ybi->xayb", st.B[l], C + 1.0, st_adv.B[l],
                                optimize=True)
        Cs.append(C)
    return kernel, Cs


def _adjoint_pass(spec: MlpSpec, st: _Stack, st_adv: _Stack, Cs,
                  mask: Optional[np.ndarray], Delta: np.ndarray,
                  out_seed: np.ndarray, diagonal: bool) -> np.ndarray:
    """Exact gradient in w of  sum(Delta * K_s) + sum(out_seed * F_s).

    Delta weights the kernel entries ((N,k) diagonal / (N,k,N,k) full) and
    out_seed (N,k) seeds the adversarial-stack output (the target term).
    Relu patterns are piecewise constant and carry no gradient.
    """
    slices = spec.slices()
    L = spec.num_layers
    N = st.A[0].shape[0]

    Abar = [np.zeros_like(a) for a in st.A]
    Abar_adv = [np.zeros_like(a) for a in st_adv.A]
    Bbar = [np.zeros_like(b) for b in st.B]
    Bbar_adv = [np.zeros_like(b) for b in st_adv.B]
    Vbar = [np.zeros(shape) for _, _, shape in slices]
    bbar = [np.zeros(shape[0]) for _, _, shape in slices]

    # seeds from the kernel term
    for l, (wsl, _, shape) in enumerate(slices):
        M = np.ones(shape) if mask is None else np.asarray(mask)[wsl].reshape(shape)
        C1 = Cs[l] + 1.0
        if diagonal:
            Cbar = np.einsum("xa,xai,xai->xi", Delta, st.B[l], st_adv.B[l],
                             optimize=True)
            Bbar[l] += np.einsum("xa,xai,xi->xai", Delta, st_adv.B[l], C1,
                                 optimize=True)
            Bbar_adv[l] += np.einsum("xa,xai,xi->xai", Delta, st.B[l], C1,
                                     optimize=True)
            T = Cbar @ M
            Abar[l] += T * st_adv.A[l]
            Abar_adv[l] += T * st.A[l]
        else:
            Cbar = np.einsum("xayb,xai,ybi->xyi", Delta, st.B[l], st_adv.B[l],
                             optimize=True)
            Bbar[l] += np.einsum("xayb,ybi,xyi->xai", Delta, st_adv.B[l], C1,
                                 optimize=True)
            Bbar_adv[l] += np.einsum("xayb,xai,xyi->ybi", Delta, st.B[l], C1,
                                     optimize=True)
            T = np.einsum("xyi,ij->xyj", Cbar, M, optimize=True)
            Abar[l] += np.einsum("xyj,yj->xj", T, st_adv.A[l], optimize=True)
            Abar_adv[l] += np.einsum("xyj,xj->yj", T, st.A[l], optimize=True)

    # adjoint of the sensitivity recursion B_l = (B_{l+1} V_{l+1}) * R_l
    for stack, bb in ((st, Bbar), (st_adv, Bbar_adv)):
        for l in range(L - 1):
            G = bb[l] * stack.R[l][:, None, :]
            Vbar[l + 1] += np.einsum("xap,xai->pi", stack.B[l + 1], G,
                                     optimize=True)
            bb[l + 1] += np.einsum("xai,pi->xap", G, stack.layers[l + 1][0],
                                   optimize=True)

    # adjoint of the forward recursion (clean stack has no output seed)
    for stack, ab, seed in ((st, Abar, None), (st_adv, Abar_adv, out_seed)):
        carry = np.zeros((N, spec.n_out)) if seed is None else seed.copy()
        Vbar[L - 1] += carry.T @ stack.A[L - 1]
        bbar[L - 1] += carry.sum(axis=0)
        carry = carry @ stack.layers[L - 1][0]
        for l in range(L - 2, -1, -1):
            z = (carry + ab[l + 1]) * stack.R[l]
            Vbar[l] += z.T @ stack.A[l]
            bbar[l] += z.sum(axis=0)
            carry = z @ stack.layers[l][0]

    grad = np.zeros(spec.num_params)
    for l, (wsl, bsl, shape) in enumerate(slices):
        g = Vbar[l]
        if mask is not None:
            g = g * np.asarray(mask)[wsl].reshape(shape)
        grad[wsl] = g.ravel()
        grad[bsl] = bbar[l]
    return grad


def _objective(spec: MlpSpec, w, mask, X, Xadv_s, F_d, K_d,
               gamma: float, diagonal: bool, want_grad: bool):
    N = X.shape[0]
    st = _Stack(spec, w, mask, X)
    st_adv = _Stack(spec, w, mask, Xadv_s)
    K_s, Cs = _kernel_terms(spec, st, st_adv, mask, diagonal)

    dF = st_adv.F - F_d
    target = float(np.sum(dF * dF)) / N
    dK = K_s - K_d
    kterm = (gamma ** 2 / N ** 2) * float(np.sum(dK * dK))
    breakdown = AwtLossBreakdown(target + kterm, target, kterm)
    if not want_grad:
        return breakdown, None

    Delta = (2.0 * gamma ** 2 / N ** 2) * dK
    out_seed = (2.0 / N) * dF
    grad = _adjoint_pass(spec, st, st_adv, Cs, mask, Delta, out_seed, diagonal)
    return breakdown, grad


def dense_reference(spec: MlpSpec, theta0, X, Y, cfg: AwtConfig):
    """Adversarial batch, outputs, and kernel of the frozen dense network."""
    Xadv = iterative_attack(spec, theta0, X, Y, cfg.attack_loss, cfg.attack)
    st = _Stack(spec, theta0, None, X)
    st_adv = _Stack(spec, theta0, None, Xadv)
    K_d, _ = _kernel_terms(spec, st, st_adv, None, cfg.kernel_mode == "diagonal")
    return Xadv, st_adv.F, K_d


def _student_attack(spec: MlpSpec, w, mask, X, Y, cfg: AwtConfig):
    return iterative_attack(spec, w, X, Y, cfg.attack_loss, cfg.attack, mask=mask)


def awt_loss(spec: MlpSpec, theta0, w, mask, X, Y, cfg: AwtConfig) -> AwtLossBreakdown:
    """Objective value for a dense anchor theta0 and masked student (w, m)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _, F_d, K_d = dense_reference(spec, theta0, X, Y, cfg)
    Xadv_s = _student_attack(spec, w, mask, X, Y, cfg)
    breakdown, _ = _objective(spec, w, mask, X, Xadv_s, F_d, K_d,
                              cfg.kernel_weight, cfg.kernel_mode == "diagonal",
                              want_grad=False)
    return breakdown


def awt_grad(spec: MlpSpec, theta0, w, mask, X, Y, cfg: AwtConfig) -> np.ndarray:
    """Exact gradient of awt_loss in w, adversarial batches held fixed."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _, F_d, K_d = dense_reference(spec, theta0, X, Y, cfg)
    Xadv_s = _student_attack(spec, w, mask, X, Y, cfg)
    _, grad = _objective(spec, w, mask, X, Xadv_s, F_d, K_d,
                         cfg.kernel_weight, cfg.kernel_mode == "diagonal",
                         want_grad=True)
    return grad


def grad_distance_term(spec: MlpSpec, theta0, w, mask, X, Y, cfg: AwtConfig,
                       loss: str) -> float:
    """Generalized first term: (1/N) || dL/df(Xadv_d) - dL/df_s(Xadv_s) ||.

    Attacks here maximize the supplied training loss, which is also the loss
    whose output-gradients are compared.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    N = X.shape[0]
    Xadv_d = iterative_attack(spec, theta0, X, Y, loss, cfg.attack)
    Xadv_s = iterative_attack(spec, w, X, Y, loss, cfg.attack, mask=mask)
    F_d = _Stack(spec, theta0, None, Xadv_d).F
    F_s = _Stack(spec, w, mask, Xadv_s).F
    _, g_d = loss_gradient(F_d, Y, loss)
    _, g_s = loss_gradient(F_s, Y, loss)
    return float(np.linalg.norm((g_d - g_s).ravel())) / N
