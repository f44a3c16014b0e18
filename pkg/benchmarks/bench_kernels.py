"""Compiled core vs numpy fallback on the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times convolution, upwind flux divergence and a fixed-length stretch of
the time loop (explicit and semi-implicit) on 1-d and 2-d grids, and
checks that both backends agree before timing.
"""
import argparse
import math
import timeit

import numpy as np

from nlch import _backend
from nlch._backend import fallback
from nlch.grid import as2d, build_grid, build_kernel

try:
    from nlch import _core
except ImportError:
    _core = None


def _field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return 0.2 + 0.6 * rng.random(grid.shape)


def _advance(mod, u, kernel, semi, t_stop):
    g = kernel.grid
    return mod.advance(as2d(u), kernel._oy, kernel._ox, kernel.weights, g.h, kernel.eps,
                       10.0, 0.7, True, False, 1.0, semi, 0.4, 1e-4, 0.0, t_stop,
                       1e-13, 1e-10, False, math.nan, math.nan, 2 ** 62)


def cases():
    for dim, n, eps in ((1, 256, 0.08), (1, 1024, 0.02), (2, 64, 0.125)):
        grid = build_grid(dim, n, 1.0)
        yield f"{dim}d n={n}", grid, build_kernel(grid, eps)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not built; only the fallback is available")
        return
    print(f"default backend compiled={_backend.COMPILED}")
    print(f"{'case':<14s}{'kernel':<22s}{'compiled [ms]':>15s}{'fallback [ms]':>15s}{'speedup':>10s}")
    for label, grid, kernel in cases():
        u2 = as2d(_field(grid))
        mu = u2 ** 10 + u2
        h = grid.h
        a = _core.convolve(u2, kernel._oy, kernel._ox, kernel.weights)
        b = fallback.convolve(u2, kernel._oy, kernel._ox, kernel.weights)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
        t_stop = 200 * 0.4 * h * h / (2 * grid.dim * (10.0 + 1.0 / kernel.eps ** 2))
        jobs = {
            "convolve": lambda m: m.convolve(u2, kernel._oy, kernel._ox, kernel.weights),
            "flux_divergence": lambda m: m.flux_divergence(u2, mu, h),
            "advance explicit": lambda m: _advance(m, u2, kernel, False, t_stop),
            "advance semi": lambda m: _advance(m, u2, kernel, True, 4 * t_stop),
        }
        for name, job in jobs.items():
            tc = min(timeit.repeat(lambda: job(_core), number=1, repeat=args.repeat))
            tf = min(timeit.repeat(lambda: job(fallback), number=1, repeat=max(1, args.repeat // 2)))
            print(f"{label:<14s}{name:<22s}{1e3 * tc:15.3f}{1e3 * tf:15.3f}{tf / tc:10.1f}")


if __name__ == "__main__":
    main()
