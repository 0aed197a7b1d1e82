"""Fully-connected ReLU networks on flat parameter vectors.

Parameter layout: for each layer l = 1..L the weight matrix W_l with shape
(n_l, n_{l-1}) stored row-major, immediately followed by the bias b_l of
length n_l.  A binary mask shares this layout; bias coordinates are never
pruned.  ReLU derivative at exactly 0 is taken to be 0, in the forward and
every derivative path alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import backend

__all__ = [
    "MlpSpec",
    "init_params",
    "forward",
    "loss_and_grads",
    "jacobian",
    "topk_mask",
    "magnitude_mask",
    "mask_density",
]

LOSS_KINDS = ("squared", "cross_entropy")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture [n_0, ..., n_L]: ReLU hidden layers, identity output."""

    layer_sizes: tuple[int, ...]

    def __init__(self, layer_sizes: Sequence[int]):
        sizes = tuple(int(n) for n in layer_sizes)
        if len(sizes) < 2:
            raise ValueError("MlpSpec needs at least input and output sizes")
        if any(n < 1 for n in sizes):
            raise ValueError("MlpSpec layer sizes must be >= 1")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def num_params(self) -> int:
        return sum(o * i + o for i, o in self._shapes())

    @property
    def num_weights(self) -> int:
        """Weight coordinates only; this is what mask density counts."""
        return sum(o * i for i, o in self._shapes())

    def _shapes(self) -> list[tuple[int, int]]:
        s = self.layer_sizes
        return [(s[l], s[l + 1]) for l in range(len(s) - 1)]

    def slices(self) -> list[tuple[slice, slice, tuple[int, int]]]:
        """Per layer: (weight slice, bias slice, (n_l, n_prev)) into the flat vector."""
        out = []
        ofs = 0
        for n_prev, n in self._shapes():
            w = slice(ofs, ofs + n * n_prev)
            ofs += n * n_prev
            b = slice(ofs, ofs + n)
            ofs += n
            out.append((w, b, (n, n_prev)))
        return out

    def weight_coords(self) -> np.ndarray:
        """Boolean array over the flat layout, True at weight coordinates."""
        coords = np.zeros(self.num_params, dtype=bool)
        for w, _, _ in self.slices():
            coords[w] = True
        return coords

    def split(self, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views (W_l, b_l) into a flat vector; reshapes share memory."""
        theta = np.asarray(theta)
        if theta.shape != (self.num_params,):
            raise ValueError(
                f"parameter vector has length {theta.shape}, expected ({self.num_params},)"
            )
        return [
            (theta[w].reshape(shape), theta[b]) for w, b, shape in self.slices()
        ]

    def pack(self, layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        theta = np.empty(self.num_params, dtype=np.float64)
        for (w, b, _), (W, bias) in zip(self.slices(), layers):
            theta[w] = np.ravel(W)
            theta[b] = bias
        return theta


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """He-scaled Gaussian weights (var 2/fan_in), zero biases."""
    layers = []
    for n_prev, n in spec._shapes():
        W = rng.normal(0.0, np.sqrt(2.0 / n_prev), size=(n, n_prev))
        layers.append((W, np.zeros(n)))
    return spec.pack(layers)


def effective_params(spec: MlpSpec, theta: np.ndarray,
                     mask: Optional[np.ndarray]) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if mask is None:
        return theta
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != theta.shape:
        raise ValueError("mask/parameter length mismatch")
    return theta * mask


def forward_acts(spec: MlpSpec, eff: np.ndarray, X: np.ndarray):
    """Forward pass returning (activations A_0..A_{L-1}, relu patterns R_1..R_{L-1}, outputs F).

    X is (N, n_in); outputs are (N, n_out).
    """
    layers = spec.split(eff)
    A = [X]
    R = []
    h = X
    for l, (W, b) in enumerate(layers):
        z = h @ W.T + b
        if l < len(layers) - 1:
            r = (z > 0.0).astype(np.float64)
            h = z * r
            A.append(h)
            R.append(r)
        else:
            return A, R, z
    raise AssertionError("unreachable")


def _as_batch(spec: MlpSpec, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != spec.n_in:
            raise ValueError(f"input length {x.shape[0]} != n_in {spec.n_in}")
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != spec.n_in:
            raise ValueError(f"input width {x.shape[1]} != n_in {spec.n_in}")
        return x, False
    raise ValueError("input must be a vector or an (N, n_in) batch")


def forward(spec: MlpSpec, theta: np.ndarray, x: np.ndarray,
            mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Network outputs; a masked call computes f with effective parameters m*theta."""
    eff = effective_params(spec, theta, mask)
    X, single = _as_batch(spec, x)
    _, _, F = forward_acts(spec, eff, X)
    return F[0] if single else F


def backprop_tensors(spec: MlpSpec, eff: np.ndarray, R: list[np.ndarray],
                     n_batch: int) -> list[np.ndarray]:
    """Output-to-preactivation sensitivities B_l = df/dz_l, shape (N, k, n_l), l = 1..L."""
    layers = spec.split(eff)
    k = spec.n_out
    B = [np.broadcast_to(np.eye(k), (n_batch, k, k)).copy()]
    for l in range(len(layers) - 1, 0, -1):
        W, _ = layers[l]
        B.append((B[-1] @ W) * R[l - 1][:, None, :])
    B.reverse()  # B[l-1] now corresponds to layer l
    return B


def loss_gradient(F: np.ndarray, y, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-example losses and dloss/dF for a batch of outputs F (N, k).

    squared: 0.5 * ||f - y||^2 with y an (N, k) target array.
    cross_entropy: -log softmax(f)[y] with y an (N,) integer label array,
    computed with max-subtracted log-sum-exp.
    """
    if kind == "squared":
        y = np.asarray(y, dtype=np.float64).reshape(F.shape)
        diff = F - y
        return 0.5 * np.sum(diff * diff, axis=1), diff
    if kind == "cross_entropy":
        y = np.asarray(y)
        idx = np.arange(F.shape[0])
        zmax = F.max(axis=1, keepdims=True)
        ez = np.exp(F - zmax)
        lse = np.log(ez.sum(axis=1)) + zmax[:, 0]
        losses = lse - F[idx, y]
        g = ez / ez.sum(axis=1, keepdims=True)
        g[idx, y] -= 1.0
        return losses, g
    raise ValueError(f"unknown loss kind {kind!r}")


def batch_backprop(spec: MlpSpec, theta: np.ndarray, X: np.ndarray, y,
                   kind: str, mask: Optional[np.ndarray] = None):
    """Mean loss over the batch, parameter gradient of the mean, and the
    per-example input gradients dloss_i/dx_i (unscaled by 1/N).

    The parameter gradient carries the mask chain factor: entries at pruned
    coordinates are exactly zero.
    """
    eff = effective_params(spec, theta, mask)
    A, R, F = forward_acts(spec, eff, X)
    losses, dF = loss_gradient(F, y, kind)
    N = X.shape[0]

    layers = spec.split(eff)
    grad = np.zeros(spec.num_params)
    gl = spec.slices()
    delta = dF / N
    for l in range(len(layers) - 1, -1, -1):
        w, b, shape = gl[l]
        grad[w] = (delta.T @ A[l]).ravel()
        grad[b] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ layers[l][0]) * R[l - 1]
    # per-example input gradient of the *per-example* loss
    delta = dF
    for l in range(len(layers) - 1, 0, -1):
        delta = (delta @ layers[l][0]) * R[l - 1]
    grad_input = delta @ layers[0][0]

    if mask is not None:
        grad *= np.asarray(mask, dtype=np.float64)
    return float(losses.mean()), grad, grad_input


def loss_and_grads(spec: MlpSpec, theta: np.ndarray, x: np.ndarray, y,
                   kind: str, mask: Optional[np.ndarray] = None):
    """Loss, parameter gradient and input gradient for a single example."""
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}")
    X, single = _as_batch(spec, x)
    if not single:
        return batch_backprop(spec, theta, X, y, kind, mask)
    if kind == "cross_entropy":
        yb = np.asarray([y])
    else:
        yb = np.asarray(y, dtype=np.float64).reshape(1, -1)
    loss, grad, grad_input = batch_backprop(spec, theta, X, yb, kind, mask)
    return loss, grad, grad_input[0]


def jacobian(spec: MlpSpec, theta: np.ndarray, X: np.ndarray,
             mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-example parameter Jacobian, shape (k*N, num_params).

    Row i*k + a holds df_a(x_i)/dtheta.  With a mask, columns at pruned
    coordinates are exactly zero.  Materializes the full matrix; intended
    for modest batches.
    """
    X, _ = _as_batch(spec, np.atleast_2d(X))
    if X.shape[0] == 0:
        raise ValueError("jacobian: empty batch")
    eff = effective_params(spec, theta, mask)
    m = None if mask is None else np.asarray(mask, dtype=np.float64)
    return backend.flat_jacobian(spec, eff, m, X)


def topk_mask(weights: np.ndarray, rho: float,
              weight_coords: Optional[np.ndarray] = None) -> np.ndarray:
    """Binary mask keeping the round(rho * n_weights) largest-magnitude weights.

    Ties break toward the smaller flat index.  When weight_coords is given,
    only those coordinates compete and all others (biases) are kept at 1.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("density must be in (0,1]")
    weights = np.asarray(weights, dtype=np.float64)
    if weight_coords is None:
        weight_coords = np.ones(weights.shape, dtype=bool)
    mask = np.ones(weights.shape, dtype=np.float64)
    wv = np.abs(weights[weight_coords])
    keep = int(round(rho * wv.size))
    order = np.argsort(-wv, kind="stable")
    sub = np.zeros(wv.size, dtype=np.float64)
    sub[order[:keep]] = 1.0
    mask[weight_coords] = sub
    return mask


def magnitude_mask(spec: MlpSpec, theta: np.ndarray, rho: float) -> np.ndarray:
    """topk_mask over the spec's weight coordinates; biases stay unpruned."""
    return topk_mask(theta, rho, spec.weight_coords())


def mask_density(spec: MlpSpec, mask: np.ndarray) -> float:
    """Fraction of weight coordinates kept by a mask."""
    coords = spec.weight_coords()
    return float(np.asarray(mask)[coords].sum() / spec.num_weights)
