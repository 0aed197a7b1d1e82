"""Shared oracles for the test suite: finite differences and small fixtures."""

import numpy as np


def fd_grad(fn, x0, step=1e-5):
    """Central finite-difference gradient of scalar fn at x0."""
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy(); xp[i] += step
        xm = x0.copy(); xm[i] -= step
        g[i] = (fn(xp) - fn(xm)) / (2.0 * step)
    return g


def fd_jacobian(fn, x0, step=1e-5):
    """Central finite-difference Jacobian of vector-valued fn at x0."""
    x0 = np.asarray(x0, dtype=np.float64)
    cols = []
    for i in range(x0.size):
        xp = x0.copy(); xp[i] += step
        xm = x0.copy(); xm[i] -= step
        cols.append((np.asarray(fn(xp)) - np.asarray(fn(xm))) / (2.0 * step))
    return np.stack(cols, axis=-1)


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(b.ravel()), 1e-300)
    return np.linalg.norm((a - b).ravel()) / denom
