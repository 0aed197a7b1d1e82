"""Empirical tangent kernels and the two distances of the mask-search objective.

Kernel rows/columns are ordered example-major, then output coordinate
(row index = i*k + a), matching the flat output vector convention used
everywhere else.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backend
from .network import MlpSpec, effective_params, jacobian

__all__ = [
    "KernelMatrix",
    "empirical_ntk",
    "empirical_mtk",
    "kernel_distance",
    "target_distance",
    "diag_mtk",
    "save_kernel",
    "load_kernel",
]

_TAGS = ("NTK", "MTK", "MTK-diagonal")


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    tag: str

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown kernel tag {self.tag!r}")


def empirical_ntk(spec: MlpSpec, theta: np.ndarray, X: np.ndarray,
                  mask: Optional[np.ndarray] = None) -> KernelMatrix:
    """J(X) J(X)^T over parameter Jacobians; square, symmetric, PSD."""
    J = jacobian(spec, theta, X, mask)
    return KernelMatrix(J @ J.T, "NTK")


def empirical_mtk(spec: MlpSpec, theta: np.ndarray, X: np.ndarray,
                  Xt: np.ndarray, mask: Optional[np.ndarray] = None) -> KernelMatrix:
    """Mixed kernel J(X) J(Xt)^T pairing clean with adversarial inputs.

    Row-aligned batches: Xt[i] must be the perturbed version of X[i].
    Not symmetric in general; equals the NTK when Xt is X.
    """
    X = np.atleast_2d(X)
    Xt = np.atleast_2d(Xt)
    if X.shape[0] != Xt.shape[0]:
        raise ValueError("clean/adversarial batch size mismatch")
    if np.array_equal(X, Xt):
        return KernelMatrix(empirical_ntk(spec, theta, X, mask).values, "MTK")
    J = jacobian(spec, theta, X, mask)
    Jt = jacobian(spec, theta, Xt, mask)
    return KernelMatrix(J @ Jt.T, "MTK")


def diag_mtk(spec: MlpSpec, theta: np.ndarray, X: np.ndarray, Xt: np.ndarray,
             mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Diagonal of the mixed kernel, length k*N, without building the matrix."""
    X = np.atleast_2d(X)
    Xt = np.atleast_2d(Xt)
    if X.shape[0] != Xt.shape[0]:
        raise ValueError("clean/adversarial batch size mismatch")
    eff = effective_params(spec, theta, mask)
    return backend.mtk_diagonal(spec, eff, mask, X, Xt)


def _values(k) -> np.ndarray:
    return k.values if isinstance(k, KernelMatrix) else np.asarray(k, dtype=np.float64)


def kernel_distance(A, B) -> float:
    """Frobenius norm of the difference of two kernel matrices."""
    a, b = _values(A), _values(B)
    if a.shape != b.shape:
        raise ValueError(f"kernel shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def target_distance(fd: np.ndarray, fs: np.ndarray) -> float:
    """l2 norm between dense and sparse output vectors."""
    fd = np.asarray(fd, dtype=np.float64).ravel()
    fs = np.asarray(fs, dtype=np.float64).ravel()
    if fd.shape != fs.shape:
        raise ValueError("output length mismatch")
    return float(np.linalg.norm(fd - fs))


_MAGIC = b"AWTK"


def save_kernel(km: KernelMatrix, path) -> None:
    """Binary dump: magic, rows, cols, tag, then row-major little-endian f64."""
    v = np.ascontiguousarray(km.values, dtype="<f8")
    tag = km.tag.encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIH", v.shape[0], v.shape[1], len(tag)))
        fh.write(tag)
        fh.write(v.tobytes())


def load_kernel(path) -> KernelMatrix:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("bad kernel file magic")
        rows, cols, taglen = struct.unpack("<IIH", fh.read(10))
        tag = fh.read(taglen).decode()
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
        if data.size != rows * cols:
            raise ValueError("truncated kernel payload")
    return KernelMatrix(data.reshape(rows, cols).copy(), tag)
