"""Compiled kernels versus the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times the Hessenberg QR eigenvalue kernel and the 2-D basin sweep on both
backends and checks that they return identical results.
"""

import argparse
import time

import numpy as np

from gegdyn import _fallback, spectral
from gegdyn.problems import MULTI_F1, MULTI_F2

try:
    from gegdyn import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def hessenberg(d, seed):
    a = np.random.default_rng(seed).normal(size=(d, d))
    return spectral._hessenberg(spectral._balance(a))


def sweep_args(n_side, max_iters):
    xs = np.linspace(-4.9, 2.9, 2 * n_side)
    ys = np.linspace(-1.9, 1.9, n_side)
    gx, gy = np.meshgrid(xs, ys)
    starts = np.ascontiguousarray(np.stack([gx.ravel(), gy.ravel()], axis=1))
    eta, gamma = 1e-2, 0.5
    return (1, MULTI_F1 + MULTI_F2, starts, eta, eta, gamma * eta, gamma * eta, 1e-8, 5, max_iters, 1e8,
            np.zeros((0, 2)), np.zeros((0, 4)), np.zeros(0), 64, 1e-10)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sweep-side", type=int, default=20, help="sweep grid is 2N x N cells")
    ap.add_argument("--sweep-iters", type=int, default=2000)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not importable; build with `pip install --no-build-isolation -e .`")
        return 1

    print(f"{'kernel':<24} {'python (s)':>12} {'compiled (s)':>13} {'speedup':>8}  identical")
    for d in (10, 25, 50):
        h = hessenberg(d, d)
        tp, rp = best_of(lambda: _fallback.hqr_eigenvalues(h), args.repeat)
        tc, rc = best_of(lambda: _kernels.hqr_eigenvalues(h), args.repeat)
        same = all(np.array_equal(a, b, equal_nan=True) for a, b in zip(rp, rc))
        print(f"{f'hqr d={d}':<24} {tp:>12.5f} {tc:>13.5f} {tp / tc:>8.1f}  {same}")

    sa = sweep_args(args.sweep_side, args.sweep_iters)
    tp, rp = best_of(lambda: _fallback.sweep_poly2d(*sa), args.repeat)
    tc, rc = best_of(lambda: _kernels.sweep_poly2d(*sa), args.repeat)
    same = all(np.array_equal(a, b, equal_nan=True) for a, b in zip(rp, rc))
    cells = sa[2].shape[0]
    label = f"sweep {cells} cells"
    print(f"{label:<24} {tp:>12.5f} {tc:>13.5f} {tp / tc:>8.1f}  {same}")
    steps = int(np.sum(rc[2]))
    print(f"sweep throughput: {steps / tc:.3g} steps/s compiled, {steps / tp:.3g} steps/s python")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
