"""Time the compiled kernels against the numpy fallback.

Run ``python benchmarks/bench_core.py``; both backends are imported
directly, so no environment variable is needed.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from berezinlab import _fallback

try:
    from berezinlab import _core
except ImportError:  # pragma: no cover
    _core = None


def cases(rng, scale):
    z_h = rng.uniform(-0.5, 0.5, 2000 * scale) + 1j * rng.uniform(0.87, 3.0, 2000 * scale)
    z_far = rng.uniform(-4, 4, 500 * scale) + 1j * rng.uniform(1e-3, 0.3, 500 * scale)
    x = rng.normal(size=(50, 2000 * scale)) + 0j
    mats = np.array([[2, 1, 1, 1], [5, 3, 3, 2], [13, 8, 8, 5], [34, 21, 21, 13]] * 250 * scale, dtype=np.int64)
    return {
        "neumaier_rows": (lambda m: m.neumaier_rows(x)),
        "log_delta_series": (lambda m: m.log_delta_series(z_h, 1e-16, 400)),
        "reduce_points": (lambda m: m.reduce_points(z_far, 1000)),
        "rademacher_batch": (lambda m: m.rademacher_batch(mats)),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--scale", type=int, default=1)
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':20s} {'fallback ms':>12s} {'compiled ms':>12s} {'speedup':>8s}")
    for name, fn in cases(rng, args.scale).items():
        tf = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _core is None:
            print(f"{name:20s} {tf:12.2f} {'n/a':>12s} {'':>8s}")
            continue
        tc = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:20s} {tf:12.2f} {tc:12.2f} {tf / tc:7.1f}x")


if __name__ == "__main__":
    main()
