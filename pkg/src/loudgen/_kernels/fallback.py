"""Pure-Python kernels used when the compiled extension is unavailable.

These implement the same contracts as the Cython versions in _biquad.pyx.
They are orders of magnitude slower but numerically equivalent, so every
result in the toolkit is reproducible without a compiler toolchain.
"""

import numpy as np

IMPLEMENTATION = "python"


def biquad_cascade(x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Run a cascade of biquad sections over a 1-D signal.

    coeffs has shape (n_sections, 5) holding (b0, b1, b2, a1, a2) per
    section with a0 normalized to 1. Uses transposed direct form II with
    zero initial state.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 2 or coeffs.shape[1] != 5:
        raise ValueError(f"coeffs must have shape (n_sections, 5), got {coeffs.shape}")

    y = x.tolist()
    for b0, b1, b2, a1, a2 in coeffs.tolist():
        s1 = 0.0
        s2 = 0.0
        for i, xi in enumerate(y):
            yi = b0 * xi + s1
            s1 = b1 * xi - a1 * yi + s2
            s2 = b2 * xi - a2 * yi
            y[i] = yi
    return np.array(y, dtype=np.float64)


def sliding_mean_square(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Mean square of x over windows of ``window`` samples every ``hop`` samples.

    Trailing samples that do not fill a complete window are dropped.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if window <= 0 or hop <= 0:
        raise ValueError("window and hop must be positive")
    n_blocks = (x.size - window) // hop + 1 if x.size >= window else 0
    out = np.empty(n_blocks, dtype=np.float64)
    xs = x.tolist()
    for j in range(n_blocks):
        start = j * hop
        acc = 0.0
        for i in range(start, start + window):
            acc += xs[i] * xs[i]
        out[j] = acc / window
    return out
