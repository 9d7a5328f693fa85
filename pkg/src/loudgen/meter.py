"""LUFS loudness measurement.

Two measurements are provided:

* ``momentary_lufs``: per-channel loudness over short sliding windows
  (1/6 s by default) with no gating, producing the dense loudness series
  used as a conditioning signal. Silent windows come out as -inf.
* ``integrated_lufs``: single program loudness per ITU-R BS.1770 /
  EBU R128 gating (400 ms blocks, 75% overlap, -70 LUFS absolute gate,
  -10 LU relative gate, channels summed with unit weights).

Both apply the K-weighting cascade first and use the standard -0.691 dB
offset that calibrates a full-scale 997 Hz sine to -3.01 LUFS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .audio import AudioBuffer
from .errors import UndefinedLoudnessError
from .kweight import FilterCascade, k_weight

_LUFS_OFFSET = -0.691
_ABSOLUTE_GATE_LUFS = -70.0
_RELATIVE_GATE_LU = -10.0

MOMENTARY_WINDOW_S = 1.0 / 6.0

_CHANNEL_NAMES = {1: ("mono",), 2: ("left", "right")}


@dataclass
class LufsSeries:
    """Loudness values in LUFS for one channel at a fixed cadence.

    Values may be -inf for silent windows. ``times`` holds each window's
    start time in seconds.
    """

    channel: str
    window_seconds: float
    hop_seconds: float
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.hop_seconds


@dataclass
class NormalizedSeries:
    """A loudness series mapped onto [0, 1] (0 at -70 LUFS, 1 at 0 LUFS)."""

    channel: str
    values: np.ndarray


def _mean_square_to_lufs(mean_square: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return _LUFS_OFFSET + 10.0 * np.log10(mean_square)


def momentary_lufs(
    buf: AudioBuffer,
    window_seconds: float = MOMENTARY_WINDOW_S,
    hop_seconds: float | None = None,
    cascade: FilterCascade | None = None,
) -> list[LufsSeries]:
    """Per-channel short-window loudness series.

    The hop defaults to the window length (non-overlapping windows), giving
    six values per second at the default window. A trailing partial window
    is dropped. Raises ValueError if the signal is shorter than one window.
    """
    if hop_seconds is None:
        hop_seconds = window_seconds
    win = int(round(window_seconds * buf.sample_rate))
    hop = int(round(hop_seconds * buf.sample_rate))
    if win <= 0 or hop <= 0:
        raise ValueError("window and hop must be at least one sample")
    if buf.frames < win:
        raise ValueError(
            f"signal of {buf.frames} frames shorter than one {win}-frame window"
        )
    weighted = k_weight(buf, cascade)
    out = []
    for name, ch in zip(_CHANNEL_NAMES[buf.channels], weighted):
        ms = _kernels.sliding_mean_square(ch, win, hop)
        out.append(
            LufsSeries(
                channel=name,
                window_seconds=window_seconds,
                hop_seconds=hop_seconds,
                values=_mean_square_to_lufs(ms),
            )
        )
    return out


def integrated_lufs(buf: AudioBuffer, cascade: FilterCascade | None = None) -> float:
    """Gated program loudness in LUFS per BS.1770.

    Raises UndefinedLoudnessError when every block is gated out (e.g. pure
    silence) and ValueError for signals shorter than one 400 ms block.
    """
    win = int(round(0.4 * buf.sample_rate))
    hop = int(round(0.1 * buf.sample_rate))
    if buf.frames < win:
        raise ValueError("integrated loudness needs at least 400 ms of audio")

    weighted = k_weight(buf, cascade)
    # Sum of per-channel block mean squares, unit channel weights.
    block_power = sum(_kernels.sliding_mean_square(ch, win, hop) for ch in weighted)
    block_lufs = _mean_square_to_lufs(block_power)

    kept = block_power[block_lufs > _ABSOLUTE_GATE_LUFS]
    if kept.size == 0:
        raise UndefinedLoudnessError("all blocks below the -70 LUFS absolute gate")
    relative_gate = _mean_square_to_lufs(np.mean(kept)) + _RELATIVE_GATE_LU
    kept = kept[_mean_square_to_lufs(kept) > relative_gate]
    if kept.size == 0:
        raise UndefinedLoudnessError("all blocks below the relative gate")
    return float(_mean_square_to_lufs(np.mean(kept)))


def clip_normalize(series: LufsSeries) -> NormalizedSeries:
    """Clip a loudness series to [-70, 0] LUFS and rescale linearly to [0, 1].

    -inf values (silence) map to 0, values at or above 0 LUFS map to 1.
    """
    clipped = np.clip(series.values, -70.0, 0.0)
    return NormalizedSeries(channel=series.channel, values=clipped / 70.0 + 1.0)
