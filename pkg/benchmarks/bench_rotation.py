"""Benchmark: compiled shear kernel vs the pure numpy fallback.

Times the raw line-resampling kernel and the full three-pass rotation at a
few image sizes and prints a speedup table. The fallback is selected
directly, so both implementations run in one process.

Usage: python benchmarks/bench_rotation.py [--repeats N]
"""

import argparse
import time

import numpy as np

from semrobust import _shear_py, kernels
from semrobust.imageops import rotate_three_pass


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel(impl, size, repeats):
    rng = np.random.default_rng(0)
    arr = rng.uniform(size=(size, size))
    shifts = rng.uniform(-size / 4, size / 4, size=size)
    return time_call(lambda: impl.shear_lines(arr, shifts, kernels.PAD_REPLICATE), repeats)


def bench_rotation(size, repeats):
    rng = np.random.default_rng(1)
    img = rng.uniform(size=(size, size))
    return time_call(lambda: rotate_three_pass(img, 33.0, padding="replicate"), repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    args = parser.parse_args()

    if not kernels.USING_EXTENSION:
        print("compiled extension not available; timing the fallback only")

    print(f"{'size':>6} {'kernel ext':>12} {'kernel py':>12} {'speedup':>8}")
    for size in args.sizes:
        t_py = bench_kernel(_shear_py, size, args.repeats)
        if kernels.USING_EXTENSION:
            t_ext = bench_kernel(kernels, size, args.repeats)
            print(f"{size:>6} {t_ext * 1e3:>10.3f}ms {t_py * 1e3:>10.3f}ms {t_py / t_ext:>7.1f}x")
        else:
            print(f"{size:>6} {'-':>12} {t_py * 1e3:>10.3f}ms {'-':>8}")

    print()
    print(f"three-pass rotation ({'extension' if kernels.USING_EXTENSION else 'fallback'} path):")
    for size in args.sizes:
        t = bench_rotation(size, args.repeats)
        print(f"{size:>6} {t * 1e3:>10.3f}ms")


if __name__ == "__main__":
    main()
