"""Pure-numpy implementations of the hot per-example kernels.

These operate on raw flat parameter vectors plus a layer-size array so the
numba lane in _hot_numba.py can share the exact same call signatures.
"""

from __future__ import annotations

import numpy as np


def _views(eff: np.ndarray, sizes: np.ndarray):
    """(W_l, b_l) views plus (w_offset, shape) bookkeeping for the flat layout."""
    out = []
    ofs = 0
    for l in range(sizes.size - 1):
        n_prev, n = int(sizes[l]), int(sizes[l + 1])
        W = eff[ofs:ofs + n * n_prev].reshape(n, n_prev)
        wofs = ofs
        ofs += n * n_prev
        b = eff[ofs:ofs + n]
        bofs = ofs
        ofs += n
        out.append((W, b, wofs, bofs))
    return out


def _forward(eff: np.ndarray, sizes: np.ndarray, X: np.ndarray):
    layers = _views(eff, sizes)
    A = [X]
    R = []
    h = X
    for l, (W, b, _, _) in enumerate(layers):
        z = h @ W.T + b
        if l < len(layers) - 1:
            r = (z > 0.0).astype(np.float64)
            h = z * r
            A.append(h)
            R.append(r)
        else:
            return A, R, z
    raise AssertionError


def _btensors(eff: np.ndarray, sizes: np.ndarray, R: list, N: int):
    layers = _views(eff, sizes)
    k = int(sizes[-1])
    B = [np.broadcast_to(np.eye(k), (N, k, k)).copy()]
    for l in range(len(layers) - 1, 0, -1):
        B.append((B[-1] @ layers[l][0]) * R[l - 1][:, None, :])
    B.reverse()
    return B


def flat_jacobian(eff: np.ndarray, mask, sizes: np.ndarray,
                  X: np.ndarray) -> np.ndarray:
    """Dense (k*N, P) per-example Jacobian of outputs w.r.t. parameters."""
    N = X.shape[0]
    k = int(sizes[-1])
    P = eff.size
    A, R, _ = _forward(eff, sizes, X)
    B = _btensors(eff, sizes, R, N)
    J = np.empty((N * k, P))
    for l, (W, b, wofs, bofs) in enumerate(_views(eff, sizes)):
        n, n_prev = W.shape
        blk = np.einsum("nai,nj->naij", B[l], A[l])
        J[:, wofs:wofs + n * n_prev] = blk.reshape(N * k, n * n_prev)
        J[:, bofs:bofs + n] = B[l].reshape(N * k, n)
    if mask is not None:
        J *= mask[None, :]
    return J


def mtk_diagonal(eff: np.ndarray, mask, sizes: np.ndarray,
                 X: np.ndarray, Xt: np.ndarray) -> np.ndarray:
    """Diagonal of the mixed kernel J(X) J(Xt)^T without materializing it."""
    N = X.shape[0]
    A, R, _ = _forward(eff, sizes, X)
    At, Rt, _ = _forward(eff, sizes, Xt)
    B = _btensors(eff, sizes, R, N)
    Bt = _btensors(eff, sizes, Rt, N)
    diag = np.zeros((N, int(sizes[-1])))
    for l, (W, b, wofs, bofs) in enumerate(_views(eff, sizes)):
        prod = A[l] * At[l]
        if mask is None:
            C = np.broadcast_to(np.sum(prod, axis=1)[:, None], (N, W.shape[0]))
        else:
            M = mask[wofs:wofs + W.size].reshape(W.shape)
            C = prod @ M.T
        diag += np.einsum("nai,nai,ni->na", B[l], Bt[l], C + 1.0)
    return diag.reshape(-1)
