"""Timing comparison between the compiled kernels and the numpy fallbacks.

Run from the repo root:

    python3 benchmarks/bench_backends.py [--points N] [--repeats R]

Prints best-of-R wall times per kernel per backend plus the speedup. The two
backends compute identical results (see tests/test_backends.py), so this is
purely a performance report.
"""

import argparse
import time

import numpy as np

from lasermixkit import _pykernels

try:
    from lasermixkit import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases(n, rng):
    bounds = np.sort(rng.uniform(-0.5, 0.3, size=9))
    values = rng.uniform(-0.7, 0.5, size=n)

    h, w = 64, 1024
    rows = rng.integers(0, h, size=n)
    cols = rng.integers(0, w, size=n)
    ranges = rng.uniform(1.0, 60.0, size=n)

    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    kinds = np.array([_pykernels.PRIM_PLANE] + [_pykernels.PRIM_BOX] * 6
                     + [_pykernels.PRIM_CYLINDER] * 6, dtype=np.int64)
    data = np.zeros((kinds.size, 8))
    for i in range(1, 7):
        cx, cy = rng.uniform(-30, 30, size=2)
        data[i, :6] = [cx, cy, 0.0, cx + 4.0, cy + 2.0, 2.5]
    for i in range(7, 13):
        data[i, :5] = [*rng.uniform(-30, 30, size=2), 0.0, 4.0, 0.6]
    origin = np.array([0.0, 0.0, 1.7])

    return {
        "bin_values": lambda mod: mod.bin_values(values, bounds),
        "rasterize": lambda mod: mod.rasterize(rows, cols, ranges, h, w),
        "ray_cast": lambda mod: mod.ray_cast(origin, dirs, kinds, data, 80.0, 1e-6),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = build_cases(args.points, rng)

    print(f"{args.points} points, best of {args.repeats} runs")
    header = f"{'kernel':<12} {'python':>10} {'native':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_py = best_of(lambda: call(_pykernels), args.repeats)
        if _kernels is None:
            print(f"{name:<12} {t_py * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_nat = best_of(lambda: call(_kernels), args.repeats)
        print(f"{name:<12} {t_py * 1e3:>8.2f}ms {t_nat * 1e3:>8.2f}ms "
              f"{t_py / t_nat:>7.1f}x")
    if _kernels is None:
        print("compiled extension not installed; native column skipped")


if __name__ == "__main__":
    main()
