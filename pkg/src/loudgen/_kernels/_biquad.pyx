# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: sequential IIR filtering and block energy sums.

The biquad recurrence has a loop-carried dependency, so it cannot be
vectorized with numpy; this extension keeps the LUFS meter fast on long
signals. fallback.py provides the equivalent pure-Python implementations.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPLEMENTATION = "cython"


def biquad_cascade(x, coeffs):
    """Run a cascade of biquad sections over a 1-D signal.

    coeffs has shape (n_sections, 5) holding (b0, b1, b2, a1, a2) per
    section with a0 normalized to 1. Uses transposed direct form II with
    zero initial state.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(
        x, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(
        coeffs, dtype=np.float64)
    if c.shape[1] != 5:
        raise ValueError(f"coeffs must have shape (n_sections, 5)")

    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t n_sections = c.shape[0]
    cdef Py_ssize_t i, k
    cdef double b0, b1, b2, a1, a2, s1, s2, xi, yi

    for k in range(n_sections):
        b0 = c[k, 0]
        b1 = c[k, 1]
        b2 = c[k, 2]
        a1 = c[k, 3]
        a2 = c[k, 4]
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            xi = y[i]
            yi = b0 * xi + s1
            s1 = b1 * xi - a1 * yi + s2
            s2 = b2 * xi - a2 * yi
            y[i] = yi
    return y


def sliding_mean_square(x, window, hop):
    """Mean square of x over windows of ``window`` samples every ``hop`` samples.

    Trailing samples that do not fill a complete window are dropped.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(
        x, dtype=np.float64)
    cdef Py_ssize_t w = window
    cdef Py_ssize_t h = hop
    if w <= 0 or h <= 0:
        raise ValueError("window and hop must be positive")

    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t n_blocks = (n - w) // h + 1 if n >= w else 0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_blocks, dtype=np.float64)
    cdef Py_ssize_t j, i, start
    cdef double acc

    for j in range(n_blocks):
        start = j * h
        acc = 0.0
        for i in range(start, start + w):
            acc += xv[i] * xv[i]
        out[j] = acc / w
    return out
