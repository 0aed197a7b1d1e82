"""First-order optimizers on flat parameter vectors."""

from __future__ import annotations

import numpy as np

__all__ = ["Sgd", "Adam", "make_optimizer"]


class Sgd:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, grad: np.ndarray) -> np.ndarray:
        """Update to subtract from the parameters."""
        return self.learning_rate * grad


class Adam:
    """Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8 defaults.

    A coordinate whose gradient is always zero (e.g. pruned weights with a
    masked gradient) accumulates nothing and is never moved.
    """

    def __init__(self, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        return self.learning_rate * mhat / (np.sqrt(vhat) + self.eps)


_OPTIMIZERS = {"sgd": Sgd, "plain_gd": Sgd, "adam": Adam}


def make_optimizer(name: str, learning_rate: float):
    try:
        cls = _OPTIMIZERS[name]
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}") from None
    return cls(learning_rate)
