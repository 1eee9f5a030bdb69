"""Time the numba kernels against the pure-numpy fallback.

Runs every hot-loop entry point on realistic shapes and prints one row
per kernel with both wall times and the speedup. The numba column is
skipped when numba is not installed. Usage:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from crfstereo._kernels import numpy_impl
from crfstereo.features import bilateral_features
from crfstereo.permutohedral import PermutohedralLattice

try:
    from crfstereo._kernels import numba_impl
except ImportError:
    numba_impl = None


def best_of(fn, repeats):
    fn()  # warmup, pays any JIT compilation up front
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases():
    rng = np.random.default_rng(0)

    img = rng.uniform(0, 255, (64, 64, 3))
    feats = bilateral_features(img, 18.65, 4.39).reshape(-1, 5)
    values = rng.uniform(0.0, 1.0, (feats.shape[0], 16))
    lattice = PermutohedralLattice(feats)
    vertex = numpy_impl.lattice_splat(
        values, lattice.offsets, lattice.weights, lattice.n_vertices
    )

    small_feats = feats[:1024].copy()
    small_values = values[:1024].copy()

    costs = rng.uniform(0.0, 4.0, (64, 64, 16))
    disp = rng.integers(0, 16, (256, 256)).astype(np.float64)
    valid = rng.uniform(size=(256, 256)) > 0.1

    gain = values.dtype.type(lattice.gain)
    return [
        (
            "gauss_filter_bruteforce (1024 pts, 5-D, 16 ch)",
            lambda impl: impl.gauss_filter_bruteforce(small_values, small_feats, True),
        ),
        (
            "lattice_splat (4096 pts, 16 ch)",
            lambda impl: impl.lattice_splat(
                values, lattice.offsets, lattice.weights, lattice.n_vertices
            ),
        ),
        (
            "lattice_blur (fwd)",
            lambda impl: impl.lattice_blur(vertex, lattice.neighbors, False),
        ),
        (
            "lattice_blur (rev)",
            lambda impl: impl.lattice_blur(vertex, lattice.neighbors, True),
        ),
        (
            "lattice_slice",
            lambda impl: impl.lattice_slice(
                vertex, lattice.offsets, lattice.weights, gain
            ),
        ),
        (
            "sgm_scan x8 (64x64x16)",
            lambda impl: [
                impl.sgm_scan(costs, 1.0, 32.0, dy, dx)
                for dy, dx in (
                    (0, 1), (0, -1), (1, 0), (-1, 0),
                    (1, 1), (1, -1), (-1, 1), (-1, -1),
                )
            ],
        ),
        (
            "median_filter_masked (256x256, r=2)",
            lambda impl: impl.median_filter_masked(disp, valid, 2),
        ),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    cases = build_cases()
    name_w = max(len(name) for name, _ in cases)
    header = f"{'kernel':<{name_w}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_np = best_of(lambda: call(numpy_impl), args.repeats)
        if numba_impl is None:
            print(f"{name:<{name_w}}  {t_np * 1e3:>8.2f}ms  {'n/a':>10}  {'n/a':>8}")
            continue
        t_nb = best_of(lambda: call(numba_impl), args.repeats)
        print(
            f"{name:<{name_w}}  {t_np * 1e3:>8.2f}ms  {t_nb * 1e3:>8.2f}ms"
            f"  {t_np / t_nb:>7.1f}x"
        )


if __name__ == "__main__":
    main()
