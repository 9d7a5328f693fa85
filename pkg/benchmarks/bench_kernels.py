"""Compiled-vs-fallback kernel benchmark.

Times the two hot loudness-metering kernels — the sequential biquad
cascade (K-weighting) and the sliding mean-square (window energies) —
under both backends on the same inputs, and verifies they agree to
float64 round-off before reporting speedups.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--seconds 30] [--rate 48000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from loudgen._kernels import IMPLEMENTATION, biquad_cascade, fallback, sliding_mean_square
from loudgen.kweight import design_k_weighting


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seconds", type=float, default=30.0,
                        help="signal length to filter (default 30)")
    parser.add_argument("--rate", type=int, default=48000,
                        help="sample rate in Hz (default 48000)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="take the best of N timed runs (default 3)")
    args = parser.parse_args()

    if IMPLEMENTATION == "python":
        print("note: compiled extension not importable; comparing Python to itself")
    rng = np.random.default_rng(0)
    signal = rng.standard_normal(int(args.seconds * args.rate))
    coeffs = design_k_weighting(args.rate).coeffs
    window = int(round(args.rate / 6.0))

    cases = [
        ("biquad_cascade", lambda impl: impl.biquad_cascade(signal, coeffs)),
        ("sliding_mean_square",
         lambda impl: impl.sliding_mean_square(signal, window, window)),
    ]

    class _Active:
        biquad_cascade = staticmethod(biquad_cascade)
        sliding_mean_square = staticmethod(sliding_mean_square)

    print(f"signal: {args.seconds:.0f} s at {args.rate} Hz "
          f"({signal.size} samples), {coeffs.shape[0]} biquad sections")
    print(f"{'kernel':<22}{'compiled (' + IMPLEMENTATION + ')':>20}"
          f"{'python':>14}{'speedup':>10}")
    for name, run in cases:
        reference = run(fallback)
        np.testing.assert_allclose(run(_Active), reference, rtol=1e-12, atol=1e-12)
        fast = _best_of(lambda: run(_Active), args.repeats)
        slow = _best_of(lambda: run(fallback), max(1, args.repeats - 2))
        print(f"{name:<22}{fast * 1e3:>17.2f} ms{slow * 1e3:>11.1f} ms"
              f"{slow / fast:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
