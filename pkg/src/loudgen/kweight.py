"""K-weighting prefilter for loudness measurement (ITU-R BS.1770).

The weighting is a cascade of two biquads: a high-frequency shelf that
models acoustic head effects, followed by an RLB-style high-pass. BS.1770
only tabulates the coefficients at 48 kHz; here both stages are designed in
closed form from the analog prototype parameters so the cascade matches the
published 48 kHz table and keeps the same frequency response at any sample
rate. Parameterization follows Mansbridge/De Man's derivation of the
BS.1770 prototype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .audio import AudioBuffer

# Analog prototype of the BS.1770 pre-filter, recovered from the 48 kHz
# reference table. The shelf gain splits between numerator terms through
# the exponent on Vb.
_SHELF_GAIN_DB = 3.999843853973347
_SHELF_FC_HZ = 1681.9744509742939
_SHELF_Q = 0.7071752369554196
_SHELF_VB_EXPONENT = 0.4996667741545416

_HIGHPASS_FC_HZ = 38.13547087602444
_HIGHPASS_Q = 0.5003270373238773


@dataclass
class FilterCascade:
    """Cascade of normalized biquads: rows of (b0, b1, b2, a1, a2), a0 = 1."""

    sample_rate: int
    coeffs: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Filter a 1-D float64 signal with zero initial state."""
        return _kernels.biquad_cascade(x, self.coeffs)

    def response(self, freqs_hz: np.ndarray) -> np.ndarray:
        """Complex frequency response H(f) of the full cascade."""
        freqs_hz = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        z_inv = np.exp(-2j * np.pi * freqs_hz / self.sample_rate)
        h = np.ones_like(z_inv)
        for b0, b1, b2, a1, a2 in self.coeffs:
            num = b0 + b1 * z_inv + b2 * z_inv**2
            den = 1.0 + a1 * z_inv + a2 * z_inv**2
            h = h * num / den

        return h

    def power_gain_db(self, freqs_hz: np.ndarray) -> np.ndarray:
        """Power gain 10*log10(|H(f)|^2) in dB."""
        return 10.0 * np.log10(np.abs(self.response(freqs_hz)) ** 2)


def _shelf_coeffs(sample_rate: int) -> np.ndarray:
    vh = 10.0 ** (_SHELF_GAIN_DB / 20.0)
    vb = vh**_SHELF_VB_EXPONENT
    k = np.tan(np.pi * _SHELF_FC_HZ / sample_rate)
    denom = 1.0 + k / _SHELF_Q + k * k
    return np.array(
        [
            (vh + vb * k / _SHELF_Q + k * k) / denom,
            2.0 * (k * k - vh) / denom,
            (vh - vb * k / _SHELF_Q + k * k) / denom,
            2.0 * (k * k - 1.0) / denom,
            (1.0 - k / _SHELF_Q + k * k) / denom,
        ]
    )


def _highpass_coeffs(sample_rate: int) -> np.ndarray:
    k = np.tan(np.pi * _HIGHPASS_FC_HZ / sample_rate)
    denom = 1.0 + k / _HIGHPASS_Q + k * k
    return np.array(
        [
            1.0,
            -2.0,
            1.0,
            2.0 * (k * k - 1.0) / denom,
            (1.0 - k / _HIGHPASS_Q + k * k) / denom,
        ]
    )


def design_k_weighting(sample_rate: int) -> FilterCascade:
    """Design the two-stage K-weighting cascade for a sample rate."""
    if sample_rate < 8000:
        raise ValueError(f"sample rate {sample_rate} too low for K-weighting design")
    coeffs = np.vstack([_shelf_coeffs(sample_rate), _highpass_coeffs(sample_rate)])
    return FilterCascade(sample_rate=sample_rate, coeffs=coeffs)


def k_weight(buf: AudioBuffer, cascade: FilterCascade | None = None) -> np.ndarray:
    """Apply K-weighting to every channel; returns (channels, frames) float64."""
    if cascade is None:
        cascade = design_k_weighting(buf.sample_rate)
    elif cascade.sample_rate != buf.sample_rate:
        raise ValueError(
            f"cascade designed for {cascade.sample_rate} Hz, buffer is {buf.sample_rate} Hz"
        )
    return np.stack([cascade.apply(ch) for ch in buf.samples])
