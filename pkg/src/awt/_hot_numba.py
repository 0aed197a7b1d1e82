"""Numba-jitted lane for the hot per-example kernels.

Same contracts as _hot_numpy; explicit loops over examples and layers with
manual indexing into the flat parameter layout.  Importing this module
fails cleanly when numba is unavailable; backend.py falls back to numpy.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _offsets(sizes):
    L = sizes.size - 1
    wofs = np.empty(L, dtype=np.int64)
    bofs = np.empty(L, dtype=np.int64)
    ofs = 0
    for l in range(L):
        n_prev = sizes[l]
        n = sizes[l + 1]
        wofs[l] = ofs
        ofs += n * n_prev
        bofs[l] = ofs
        ofs += n
    return wofs, bofs, ofs


@njit(cache=True)
def _forward_one(eff, sizes, wofs, bofs, x):
    """Activations A_0..A_{L-1} and relu patterns R_1..R_{L-1} for one example."""
    L = sizes.size - 1
    acts = [x]
    pats = [x]  # placeholder entry; stripped before return
    h = x
    for l in range(L - 1):
        n_prev = sizes[l]
        n = sizes[l + 1]
        W = eff[wofs[l]:wofs[l] + n * n_prev].reshape(n, n_prev)
        z = np.dot(W, h) + eff[bofs[l]:bofs[l] + n]
        for i in range(n):
            if z[i] < 0.0:
                z[i] = 0.0
        pats.append((z > 0.0).astype(np.float64))
        acts.append(z)
        h = z
    return acts, pats[1:]


@njit(cache=True)
def _bmat_one(eff, sizes, wofs, bofs, pats):
    """B_l = df/dz_l as a list of (k, n_l) matrices for one example."""
    L = sizes.size - 1
    k = sizes[L]
    B = [np.eye(k)]
    for l in range(L - 1, 0, -1):
        n_prev = sizes[l]
        n = sizes[l + 1]
        W = eff[wofs[l]:wofs[l] + n * n_prev].reshape(n, n_prev)
        nxt = np.dot(B[len(B) - 1], W)
        pat = pats[l - 1]
        for a in range(k):
            for j in range(n_prev):
                nxt[a, j] *= pat[j]
        B.append(nxt)
    rev = [B[len(B) - 1 - i] for i in range(len(B))]
    return rev


@njit(cache=True)
def _flat_jacobian(eff, mask, has_mask, sizes, X):
    N = X.shape[0]
    L = sizes.size - 1
    k = sizes[L]
    wofs, bofs, P = _offsets(sizes)
    J = np.zeros((N * k, P))
    for n in range(N):
        acts, pats = _forward_one(eff, sizes, wofs, bofs, X[n])
        B = _bmat_one(eff, sizes, wofs, bofs, pats)
        for a in range(k):
            row = n * k + a
            for l in range(L):
                n_prev = sizes[l]
                nl = sizes[l + 1]
                for i in range(nl):
                    bi = B[l][a, i]
                    if bi != 0.0:
                        base = wofs[l] + i * n_prev
                        for j in range(n_prev):
                            J[row, base + j] = bi * acts[l][j]
                    J[row, bofs[l] + i] = bi
            if has_mask:
                for p in range(P):
                    J[row, p] *= mask[p]
    return J


@njit(cache=True)
def _forward_batch(eff, sizes, wofs, bofs, X):
    """Batched activations A_0..A_{L-1} and relu patterns R_1..R_{L-1}."""
    L = sizes.size - 1
    acts = [X]
    pats = [X]  # placeholder entry; stripped before return
    H = X
    for l in range(L - 1):
        n_prev = sizes[l]
        n = sizes[l + 1]
        W = eff[wofs[l]:wofs[l] + n * n_prev].reshape(n, n_prev)
        Z = np.dot(H, W.T) + eff[bofs[l]:bofs[l] + n]
        R = (Z > 0.0).astype(np.float64)
        Z = Z * R
        pats.append(R)
        acts.append(Z)
        H = Z
    return acts, pats[1:]


@njit(cache=True)
def _bmat_batch(eff, sizes, wofs, bofs, pats, N):
    """Batched B_l = df/dz_l, a list of (N, k, n_l) tensors."""
    L = sizes.size - 1
    k = sizes[L]
    B0 = np.zeros((N, k, k))
    for n in range(N):
        for a in range(k):
            B0[n, a, a] = 1.0
    B = [B0]
    for l in range(L - 1, 0, -1):
        n_prev = sizes[l]
        n = sizes[l + 1]
        W = eff[wofs[l]:wofs[l] + n * n_prev].reshape(n, n_prev)
        prev = B[len(B) - 1]
        nxt = np.empty((N, k, n_prev))
        for ex in range(N):
            blk = np.dot(prev[ex], W)
            pat = pats[l - 1][ex]
            for a in range(k):
                for j in range(n_prev):
                    blk[a, j] *= pat[j]
            nxt[ex] = blk
        B.append(nxt)
    rev = [B[len(B) - 1 - i] for i in range(len(B))]
    return rev


@njit(cache=True)
def _mtk_diagonal(eff, mask, has_mask, sizes, X, Xt):
    N = X.shape[0]
    L = sizes.size - 1
    k = sizes[L]
    wofs, bofs, P = _offsets(sizes)
    acts, pats = _forward_batch(eff, sizes, wofs, bofs, X)
    acts_t, pats_t = _forward_batch(eff, sizes, wofs, bofs, Xt)
    B = _bmat_batch(eff, sizes, wofs, bofs, pats, N)
    Bt = _bmat_batch(eff, sizes, wofs, bofs, pats_t, N)
    diag = np.zeros(N * k)
    for l in range(L):
        n_prev = sizes[l]
        nl = sizes[l + 1]
        prod = acts[l] * acts_t[l]
        if has_mask:
            M = mask[wofs[l]:wofs[l] + nl * n_prev].reshape(nl, n_prev)
            C = np.dot(prod, M.T)
        else:
            C = np.empty((N, nl))
            for n in range(N):
                s = 0.0
                for j in range(n_prev):
                    s += prod[n, j]
                for i in range(nl):
                    C[n, i] = s
        for n in range(N):
            for a in range(k):
                s = 0.0
                for i in range(nl):
                    s += B[l][n, a, i] * Bt[l][n, a, i] * (C[n, i] + 1.0)
                diag[n * k + a] += s
    return diag


def flat_jacobian(eff, mask, sizes, X):
    has_mask = mask is not None
    m = mask if has_mask else np.empty(0)
    return _flat_jacobian(eff, m, has_mask, sizes, X)


def mtk_diagonal(eff, mask, sizes, X, Xt):
    has_mask = mask is not None
    m = mask if has_mask else np.empty(0)
    return _mtk_diagonal(eff, m, has_mask, sizes, X, Xt)
