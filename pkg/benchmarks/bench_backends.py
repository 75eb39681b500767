"""Timing comparison of the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_backends.py [--points N] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from earth4d.backends import fallback

try:
    from earth4d.backends import _core as compiled
except ImportError:
    compiled = None


def _timeit(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=100_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    pts = rng.random((args.points, 3))
    resolution = 4096
    table = rng.standard_normal((1 << 14, 2)).astype(np.float32)
    logits = rng.standard_normal((1 << 12, 8)).astype(np.float32)
    upstream = rng.standard_normal((args.points, 2)).astype(np.float32)

    cases = [
        (
            "plain forward",
            lambda m: m.level_forward(pts, resolution, False, table),
        ),
        (
            "plain backward",
            lambda m: m.level_backward(
                pts, resolution, False, upstream, np.zeros_like(table)
            ),
        ),
        (
            "probed forward (soft)",
            lambda m: m.probed_level_forward(pts, resolution, table, logits, 1.0, False),
        ),
        (
            "probed forward (hard)",
            lambda m: m.probed_level_forward(pts, resolution, table, logits, 1.0, True),
        ),
        (
            "probed backward (soft)",
            lambda m: m.probed_level_backward(
                pts, resolution, table, logits, 1.0, False,
                upstream, np.zeros_like(table), np.zeros_like(logits),
            ),
        ),
    ]

    print(f"points={args.points} repeats={args.repeats} (best-of timings, ms)")
    print(f"{'kernel':26s} {'fallback':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, call in cases:
        t_fb = _timeit(lambda: call(fallback), args.repeats) * 1e3
        if compiled is None:
            print(f"{name:26s} {t_fb:10.2f} {'n/a':>10s} {'n/a':>8s}")
            continue
        t_c = _timeit(lambda: call(compiled), args.repeats) * 1e3
        print(f"{name:26s} {t_fb:10.2f} {t_c:10.2f} {t_fb / t_c:7.1f}x")
    if compiled is None:
        print("compiled backend not built; showing fallback only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
