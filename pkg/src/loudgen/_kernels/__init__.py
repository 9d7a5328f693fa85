"""Kernel selection: compiled extension if present, pure Python otherwise.

Set LOUDGEN_PURE=1 in the environment to force the Python fallback even
when the compiled extension is importable (used by the parity tests and
the benchmark).
"""

import os

from . import fallback

if os.environ.get("LOUDGEN_PURE") == "1":
    _impl = fallback
else:
    try:
        from . import _biquad as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = fallback

IMPLEMENTATION = _impl.IMPLEMENTATION
biquad_cascade = _impl.biquad_cascade
sliding_mean_square = _impl.sliding_mean_square

__all__ = ["IMPLEMENTATION", "biquad_cascade", "sliding_mean_square", "fallback"]
