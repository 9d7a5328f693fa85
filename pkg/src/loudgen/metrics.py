"""Evaluation metrics over caller-supplied features, labels, and signals.

Feature extraction backbones are external to the toolkit: these functions
take precomputed N x d feature sets, N x K label-probability sets, or raw
audio for the energy-peak detector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .errors import ConditioningError, DimensionError, NormalizationError

_EIG_CLAMP = 1e-10
_KL_FLOOR = 1e-12


@dataclass
class PeakList:
    """Strictly increasing peak times in seconds."""

    times: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.times.ndim != 1:
            raise ValueError("peak times must be a 1-D sequence")
        if self.times.size and (np.any(np.diff(self.times) <= 0) or self.times[0] < 0):
            raise ValueError("peak times must be nonnegative and strictly increasing")

    def __len__(self) -> int:
        return self.times.size


def _validate_features(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DimensionError(f"{name} must be N x d with N >= 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def _psd_sqrt(matrix: np.ndarray, what: str) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition with a small clamp."""
    eigvals, eigvecs = np.linalg.eigh(matrix)
    floor = -_EIG_CLAMP * max(1.0, float(np.max(np.abs(eigvals))))
    if np.any(eigvals < floor):
        raise ConditioningError(f"{what} is indefinite beyond tolerance: min eig {eigvals.min()}")
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets.

    FD = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the
    matrix square root taken through the symmetric form
    sqrt(S_a) S_b sqrt(S_a) so the eigenproblem stays Hermitian.
    """
    a = _validate_features(a, "feature set a")
    b = _validate_features(b, "feature set b")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")

    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))

    root_a = _psd_sqrt(cov_a, "covariance of a")
    inner = root_a @ cov_b @ root_a
    inner_eigs = np.linalg.eigvalsh(inner)
    floor = -_EIG_CLAMP * max(1.0, float(np.max(np.abs(inner_eigs))))
    if np.any(inner_eigs < floor):
        raise ConditioningError("covariance product is indefinite beyond tolerance")
    cross_trace = float(np.sum(np.sqrt(np.clip(inner_eigs, 0.0, None))))

    mean_term = float(np.sum((mu_a - mu_b) ** 2))
    trace_term = float(np.trace(cov_a) + np.trace(cov_b)) - 2.0 * cross_trace
    return max(mean_term + trace_term, 0.0)


def kl_label_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Mean KL(p_i || q_i) over paired label-probability rows, q floored."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim == 1:
        p = p[np.newaxis, :]
    if q.ndim == 1:
        q = q[np.newaxis, :]
    if p.shape != q.shape:
        raise DimensionError(f"label sets differ in shape: {p.shape} vs {q.shape}")
    for name, rows in (("p", p), ("q", q)):
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6) or np.any(rows < 0):
            raise NormalizationError(f"{name} rows must be probability vectors")
    q = np.maximum(q, _KL_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p / q), 0.0)
    return float(np.mean(terms.sum(axis=1)))


def energy_peaks(
    signal: AudioBuffer | np.ndarray,
    window: float,
    threshold: float = 0.5,
    frame_rate: float | None = None,
) -> PeakList:
    """Detect energy peaks: local maxima of the RMS envelope above
    threshold * global max, at least one window apart.

    For an AudioBuffer the envelope is windowed RMS of the channel mean
    (hop window/4). A raw 1-D array is treated as an energy envelope
    already, sampled at ``frame_rate`` frames per second.
    """
    if window <= 0 or not 0 < threshold <= 1:
        raise ValueError("window must be positive and threshold in (0, 1]")
    if isinstance(signal, AudioBuffer):
        mono = signal.samples.mean(axis=0)
        win = max(int(round(window * signal.sample_rate)), 1)
        hop = max(win // 4, 1)
        n_blocks = (mono.size - win) // hop + 1 if mono.size >= win else 0
        if n_blocks <= 0:
            return PeakList(times=np.array([]))
        idx = np.arange(n_blocks)[:, np.newaxis] * hop + np.arange(win)
        env = np.sqrt(np.mean(mono[idx] ** 2, axis=1))
        times = np.arange(n_blocks) * hop / signal.sample_rate + window / 2.0
        min_gap = window
    else:
        env = np.asarray(signal, dtype=np.float64)
        if env.ndim != 1 or env.size == 0:
            raise ValueError("energy sequence must be a nonempty 1-D array")
        if frame_rate is None or frame_rate <= 0:
            raise ValueError("frame_rate is required for a raw energy sequence")
        times = (np.arange(env.size) + 0.5) / frame_rate
        min_gap = window

    peak = env.max()
    if peak <= 0:
        return PeakList(times=np.array([]))
    level = threshold * peak
    interior = (env[1:-1] >= env[:-2]) & (env[1:-1] > env[2:]) & (env[1:-1] >= level)
    candidates = np.where(interior)[0] + 1
    if env.size >= 2:
        if env[0] > env[1] and env[0] >= level:
            candidates = np.append(0, candidates)
        if env[-1] > env[-2] and env[-1] >= level:
            candidates = np.append(candidates, env.size - 1)
    elif env[0] >= level:
        candidates = np.array([0])

    # Greedy by height: keep the tallest candidates subject to the min gap.
    accepted: list[float] = []
    for i in sorted(candidates, key=lambda i: (-env[i], i)):
        if all(abs(times[i] - t) >= min_gap for t in accepted):
            accepted.append(times[i])
    return PeakList(times=np.array(sorted(accepted)))


def av_align(audio_peaks: PeakList, video_peaks: PeakList, tolerance: float = 0.1) -> float:
    """Intersection-over-union of two peak sets under greedy +-tolerance matching.

    Peaks are walked chronologically; each peak matches at most once. The
    score is matches / (|A| + |V| - matches); two empty lists score 1.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    a, v = audio_peaks.times, video_peaks.times
    if a.size == 0 and v.size == 0:
        return 1.0
    i = j = matches = 0
    while i < a.size and j < v.size:
        if abs(a[i] - v[j]) <= tolerance:
            matches += 1
            i += 1
            j += 1
        elif a[i] < v[j]:
            i += 1
        else:
            j += 1
    return matches / (a.size + v.size - matches)
