"""Shared numeric primitives: lp norms/projections, normal CDF, seeded RNG.

All arithmetic is float64.  Matrices and vectors are plain numpy arrays;
every public helper validates shapes and leaves inputs untouched.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["lp_norm", "lp_project", "std_normal_cdf", "make_rng", "spawn_rng"]


def lp_norm(v: np.ndarray, p: float) -> float:
    """lp norm of a vector for p in {1, 2, inf}."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("lp_norm: empty vector")
    if p == 1:
        return float(np.sum(np.abs(v)))
    if p == 2:
        return float(np.sqrt(np.sum(v * v)))
    if p == math.inf:
        return float(np.max(np.abs(v)))
    raise ValueError(f"lp_norm: unsupported norm order {p!r}")


def lp_project(v: np.ndarray, p: float, eps: float) -> np.ndarray:
    """Project v onto the lp ball of radius eps (p in {2, inf}).

    Returns v unchanged (a copy) when it is already inside the ball, so the
    operation is exactly idempotent.
    """
    v = np.asarray(v, dtype=np.float64)
    if eps < 0:
        raise ValueError("lp_project: negative radius")
    if p == 2:
        n = np.sqrt(np.sum(v * v))
        if n <= eps:
            return v.copy()
        out = v * (eps / n)
        # Rounding can leave the rescaled vector a few ulps outside the
        # ball; nudge it inward so the result projects to itself.
        while np.sqrt(np.sum(out * out)) > eps:
            out = np.nextafter(out, 0.0)
        return out
    if p == math.inf:
        return np.clip(v, -eps, eps)
    raise ValueError(f"lp_project: unsupported norm order {p!r}")


def std_normal_cdf(z: float) -> float:
    """Standard normal CDF via the erf identity Phi(z) = (1 + erf(z/sqrt 2))/2."""
    return 0.5 * (1.0 + math.erf(float(z) / math.sqrt(2.0)))


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; same seed and call sequence reproduce bit-for-bit."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rng(seed: int, *stream: int) -> np.random.Generator:
    """Derive an independent deterministic stream from (seed, stream ids).

    Used to give each attack / epoch / row its own generator without
    coupling their call sequences.
    """
    return np.random.Generator(np.random.PCG64([seed, *stream]))
