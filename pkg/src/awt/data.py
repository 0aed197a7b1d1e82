"""Dataset ingestion: MNIST IDX files and synthetic generators."""

from __future__ import annotations

import struct

import numpy as np

from .numerics import make_rng, spawn_rng

__all__ = ["MnistFormatError", "load_mnist_idx", "subset_indices",
           "gaussian_toy", "blobs", "xor_dataset"]

_IMAGE_MAGIC = 2051
_LABEL_MAGIC = 2049


class MnistFormatError(ValueError):
    """IDX parse failure; the message names the offending field."""


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise MnistFormatError(f"truncated payload: {what}")
    return data


def load_mnist_idx(images_path, labels_path):
    """(X, y): X is (N, 784) float64 in [0,1] (bytes / 255), y is (N,) int64.

    Big-endian IDX headers: images magic 2051 with dims (N, 28, 28), labels
    magic 2049 with dim (N).
    """
    with open(images_path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">iiii", _read_exact(fh, 16, "image header"))
        if magic != _IMAGE_MAGIC:
            raise MnistFormatError(f"bad magic in images file: {magic}")
        if rows != 28 or cols != 28:
            raise MnistFormatError(f"bad image dims: {rows}x{cols}")
        pixels = np.frombuffer(_read_exact(fh, n * rows * cols, "image pixels"),
                               dtype=np.uint8)
    with open(labels_path, "rb") as fh:
        magic, n_labels = struct.unpack(">ii", _read_exact(fh, 8, "label header"))
        if magic != _LABEL_MAGIC:
            raise MnistFormatError(f"bad magic in labels file: {magic}")
        labels = np.frombuffer(_read_exact(fh, n_labels, "label bytes"),
                               dtype=np.uint8)
    if n != n_labels:
        raise MnistFormatError(
            f"image/label count mismatch: {n} images vs {n_labels} labels")
    X = pixels.astype(np.float64).reshape(n, rows * cols) / 255.0
    return X, labels.astype(np.int64)


def subset_indices(total: int, n: int, seed: int) -> np.ndarray:
    """Stable subsample: the index set depends only on (seed, n) (and total)."""
    if n > total:
        raise ValueError(f"cannot take {n} of {total} examples")
    rng = spawn_rng(seed, n)
    return np.sort(rng.choice(total, size=n, replace=False))


def gaussian_toy(n: int, d: int, seed=None, mu_scale: float = 3.0,
                 sigma: float = 1.0, rng=None):
    """Two-class Gaussian mixture: x = y*mu + sigma*noise, mu = [mu_scale,0,...],
    labels y in {-1,+1} with equal probability.  Returns (X, y).

    Pass either a seed or an existing generator."""
    if rng is None:
        rng = make_rng(seed)
    y = rng.choice(np.array([-1.0, 1.0]), size=n)
    mu = np.zeros(d)
    mu[0] = mu_scale
    X = y[:, None] * mu + sigma * rng.normal(size=(n, d))
    return X, y


def blobs(n: int, seed: int, separation: float = 4.0, sigma: float = 0.5):
    """Two linearly separable 2-D clusters, labels in {0, 1}."""
    rng = make_rng(seed)
    y = rng.integers(0, 2, size=n)
    centers = np.array([[-separation / 2, 0.0], [separation / 2, 0.0]])
    X = centers[y] + sigma * rng.normal(size=(n, 2))
    return X, y.astype(np.int64)


def xor_dataset():
    """The four XOR points with labels in {0, 1}."""
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0], dtype=np.int64)
    return X, y
