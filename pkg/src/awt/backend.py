"""Backend selection for the hot per-example kernels.

Two interchangeable lanes: a numba @njit lane and a pure-numpy lane.
The env var AWT_BACKEND picks one ("numba", "numpy", or "auto"; default
auto, which uses numba when it imports).  benchmarks/bench_backends.py
compares the two.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

_impl = None
_name = None


def _load(choice: str):
    if choice == "numpy":
        from . import _hot_numpy as impl
        return impl, "numpy"
    try:
        from . import _hot_numba as impl
        return impl, "numba"
    except ImportError:
        if choice == "numba":
            raise
        from . import _hot_numpy as impl
        return impl, "numpy"


def _get():
    global _impl, _name
    if _impl is None:
        choice = os.environ.get("AWT_BACKEND", "auto").lower()
        if choice not in ("auto", "numba", "numpy"):
            raise ValueError(f"AWT_BACKEND must be auto/numba/numpy, got {choice!r}")
        _impl, _name = _load(choice)
    return _impl


def use_backend(name: str) -> None:
    """Force a lane programmatically (tests and benchmarks)."""
    global _impl, _name
    _impl, _name = _load(name)
    if name in ("numba", "numpy") and _name != name:
        raise RuntimeError(f"requested backend {name!r} unavailable")


def backend_name() -> str:
    _get()
    return _name  # type: ignore[return-value]


def _sizes(spec) -> np.ndarray:
    return np.asarray(spec.layer_sizes, dtype=np.int64)


def flat_jacobian(spec, eff: np.ndarray, mask: Optional[np.ndarray],
                  X: np.ndarray) -> np.ndarray:
    return _get().flat_jacobian(
        np.ascontiguousarray(eff, dtype=np.float64),
        None if mask is None else np.ascontiguousarray(mask, dtype=np.float64),
        _sizes(spec), np.ascontiguousarray(X, dtype=np.float64))


def mtk_diagonal(spec, eff: np.ndarray, mask: Optional[np.ndarray],
                 X: np.ndarray, Xt: np.ndarray) -> np.ndarray:
    return _get().mtk_diagonal(
        np.ascontiguousarray(eff, dtype=np.float64),
        None if mask is None else np.ascontiguousarray(mask, dtype=np.float64),
        _sizes(spec), np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(Xt, dtype=np.float64))
