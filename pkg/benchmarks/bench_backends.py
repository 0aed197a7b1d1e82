"""Compare the numba and pure-numpy lanes of the hot kernels.

Times flat_jacobian and mtk_diagonal on an MNIST-scale MLP batch under
both backends (the numba lane is warmed up first so JIT compilation is
excluded) and prints a per-function speedup table.

Usage: python benchmarks/bench_backends.py [--batch N] [--repeats R]
"""

import argparse
import time

import numpy as np

from awt import backend
from awt.network import MlpSpec, init_params, magnitude_mask
from awt.numerics import make_rng


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    spec = MlpSpec([784, 300, 100, 10])
    rng = make_rng(0)
    theta = init_params(spec, rng)
    mask = magnitude_mask(spec, theta, 0.1)
    eff = theta * mask
    X = rng.random((args.batch, 784))
    Xt = np.clip(X + rng.uniform(-0.3, 0.3, size=X.shape), 0.0, 1.0)

    cases = {
        "flat_jacobian": lambda: backend.flat_jacobian(spec, eff, mask, X),
        "mtk_diagonal": lambda: backend.mtk_diagonal(spec, eff, mask, X, Xt),
    }

    results = {}
    for lane in ("numpy", "numba"):
        try:
            backend.use_backend(lane)
        except (RuntimeError, ImportError):
            print(f"{lane}: unavailable, skipping")
            continue
        for name, fn in cases.items():
            fn()  # warm-up (JIT compile on the numba lane)
            results[(lane, name)] = _time(fn, args.repeats)

    print(f"\nbatch={args.batch}  model=784-300-100-10  density=0.10")
    print(f"{'function':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")
    for name in cases:
        t_np = results.get(("numpy", name))
        t_nb = results.get(("numba", name))
        row = f"{name:<16}"
        row += f"{t_np * 1e3:>12.2f}" if t_np else f"{'-':>12}"
        row += f"{t_nb * 1e3:>12.2f}" if t_nb else f"{'-':>12}"
        if t_np and t_nb:
            row += f"{t_np / t_nb:>8.2f}x"
        print(row)


if __name__ == "__main__":
    main()
