#!/usr/bin/env python3
"""Time the numpy and numba kernel paths on the same inputs and check they agree.

Run from the repository root:  python benchmarks/bench_kernels.py
"""
import argparse
import time

import numpy as np

from rdlkit import _kernels


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    n = 256
    pmf = rng.dirichlet(np.ones(4)).reshape(2, 2)
    ctx = rng.integers(0, 2, n)
    for bits in (10, 14):
        cb = rng.integers(0, 2, (1 << bits, n))
        yield f"typical_mask 2^{bits} x {n}", "typical_mask", (ctx, cb, pmf, 0.2)
    for m in (2_000, 20_000):
        pts = np.round(rng.random((m, 5)), 2)
        yield f"pareto_keep {m} x 5", "pareto_keep", (pts, 1e-12)
    p = rng.dirichlet(np.ones(16 ** 3)).reshape(16, 16, 16)
    law = rng.dirichlet(np.ones(64), size=(16, 16))
    yield "xzo_from_law 16^3 x 64", "xzo_from_law", (p, law)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _kernels.numba_impl is None:
        print("numba is not installed; nothing to compare")
        return
    # first call compiles; keep it out of the timings
    t0 = time.perf_counter()
    for _, kernel, inputs in cases(np.random.default_rng(args.seed)):
        getattr(_kernels.numba_impl, kernel)(*inputs)
    print(f"JIT warmup: {time.perf_counter() - t0:.2f} s\n")

    print(f"{'case':<28}{'numpy (s)':>11}{'numba (s)':>11}{'speedup':>9}  match")
    for label, kernel, inputs in cases(np.random.default_rng(args.seed)):
        t_np, a = best_of(lambda: getattr(_kernels.numpy_impl, kernel)(*inputs), args.repeat)
        t_nb, b = best_of(lambda: getattr(_kernels.numba_impl, kernel)(*inputs), args.repeat)
        same = np.array_equal(a, b) if a.dtype == bool else np.allclose(a, b, rtol=0, atol=1e-15)
        print(f"{label:<28}{t_np:>11.4f}{t_nb:>11.4f}{t_np / t_nb:>8.1f}x  {'ok' if same else 'MISMATCH'}")


if __name__ == "__main__":
    main()
