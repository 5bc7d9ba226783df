"""Compiled (Cython) versus pure-numpy kernels.

    python benchmarks/bench_kernels.py [--paths 2000] [--repeat 3]

Each kernel runs on both backends with identical inputs. The script prints
best-of-N wall times and the largest absolute difference between the two
outputs. Uniforms agree exactly; transformed draws differ by a few ulp
because libm and numpy evaluate the transcendentals differently.
"""

import argparse
import time

import numpy as np

from levyescape import kernels
from levyescape.model import MorrisLecarDrift
from levyescape.noise import NoiseSpec
from levyescape.solver import S_STAR, Region


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float)), initial=0.0))


def cases(n_draws, n_paths):
    ctr = np.arange(n_draws, dtype=np.uint64)
    drift = MorrisLecarDrift()
    spec = NoiseSpec(1.25, 0.5, 0.5)
    box = Region().box
    ids = np.arange(n_paths, dtype=np.int64)
    yield (f"uniform_pairs ({n_draws} draws)",
           lambda b: kernels.uniform_pairs(7, ctr, 0, 0, backend=b))
    yield (f"noise_draws alpha=1.25 ({n_draws} draws)",
           lambda b: kernels.noise_draws(1.25, 7, ctr, 0, 0, backend=b))
    yield (f"simulate_paths ML, alpha=1.25 ({n_paths} paths, dt=1e-3)",
           lambda b: kernels.simulate_paths(drift, S_STAR, box, spec.alpha, spec.sigma1,
                                            spec.sigma2, 1e-3, 10**7, 20190101, ids, backend=b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, default=1_000_000)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        kernels.get_impl("cython")
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'kernel':<55} {'python s':>10} {'cython s':>10} {'speedup':>8} {'max diff':>9}")
    for name, fn in cases(args.draws, args.paths):
        tp, op = best_of(lambda: fn("python"), args.repeat)
        tc, oc = best_of(lambda: fn("cython"), args.repeat)
        print(f"{name:<55} {tp:>10.3f} {tc:>10.3f} {tp / tc:>7.1f}x {max_diff(op, oc):>9.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
