import numpy as np
import pytest

from loudgen.audio import AudioBuffer, SignalSpec, synth_signal
from loudgen.errors import DimensionError, NormalizationError
from loudgen.metrics import (
    PeakList,
    av_align,
    energy_peaks,
    frechet_distance,
    kl_label_divergence,
)


def _features(n, d, seed, shift=0.0, scale=1.0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, d)) * scale + shift


def test_fd_identical_sets_zero():
    a = _features(200, 5, seed=0)
    assert frechet_distance(a, a.copy()) <= 1e-8


def test_fd_symmetric():
    a = _features(300, 4, seed=1)
    b = _features(300, 4, seed=2, shift=0.3)
    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-9)


def test_fd_mean_shift_equal_cov():
    # With equal covariance the trace term cancels and FD -> |shift|^2.
    rng = np.random.default_rng(3)
    a = rng.standard_normal((20000, 3))
    shift = np.array([0.6, -0.2, 0.1])
    b = a + shift  # identical sample covariance, exact mean shift
    fd = frechet_distance(a, b)
    assert fd == pytest.approx(float(np.sum(shift**2)), abs=1e-6)


def test_fd_univariate_closed_form():
    # For 1-D Gaussians FD = (mu_a - mu_b)^2 + (s_a - s_b)^2.
    rng = np.random.default_rng(4)
    a = rng.standard_normal((200000, 1)) * 1.0
    b = rng.standard_normal((200000, 1)) * 2.0 + 1.0
    expected = 1.0 + (2.0 - 1.0) ** 2
    assert frechet_distance(a, b) == pytest.approx(expected, rel=0.05)


def test_fd_validates_inputs():
    with pytest.raises(DimensionError):
        frechet_distance(np.zeros((1, 3)), np.zeros((5, 3)))
    with pytest.raises(DimensionError):
        frechet_distance(np.zeros((5, 3)), np.zeros((5, 4)))
    with pytest.raises(ValueError):
        frechet_distance(np.full((5, 3), np.nan), np.zeros((5, 3)))


def test_kl_zero_for_identical():
    p = np.array([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]])
    assert kl_label_divergence(p, p.copy()) == 0.0


def test_kl_log2_anchor():
    # p concentrated on one label, q uniform over two: KL = log 2.
    p = np.array([1.0, 0.0])
    q = np.array([0.5, 0.5])
    assert kl_label_divergence(p, q) == pytest.approx(np.log(2.0), abs=1e-12)


def test_kl_asymmetric_and_mean_over_rows():
    p = np.array([[0.9, 0.1], [0.5, 0.5]])
    q = np.array([[0.5, 0.5], [0.5, 0.5]])
    forward = kl_label_divergence(p, q)
    backward = kl_label_divergence(q, p)
    assert forward != backward
    row0 = kl_label_divergence(p[0], q[0])
    assert forward == pytest.approx(row0 / 2.0, rel=1e-12)  # second row contributes 0


def test_kl_rejects_unnormalized():
    with pytest.raises(NormalizationError):
        kl_label_divergence(np.array([0.5, 0.4]), np.array([0.5, 0.5]))
    with pytest.raises(NormalizationError):
        kl_label_divergence(np.array([0.5, 0.5]), np.array([1.2, -0.2]))
    with pytest.raises(DimensionError):
        kl_label_divergence(np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]))


def test_kl_handles_zero_q_via_floor():
    p = np.array([0.5, 0.5])
    q = np.array([1.0, 0.0])
    value = kl_label_divergence(p, q)
    assert np.isfinite(value) and value > 0


def test_peak_list_validation():
    with pytest.raises(ValueError):
        PeakList(times=np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        PeakList(times=np.array([-0.1, 0.5]))
    assert len(PeakList(times=np.array([]))) == 0


def test_peaks_silence_empty():
    buf = synth_signal(SignalSpec(kind="silence", duration=1.0), 8000, 2)
    assert len(energy_peaks(buf, window=0.25)) == 0


def test_peaks_single_click():
    rate = 8000
    samples = np.zeros((2, rate))
    samples[:, 4000:4080] = 0.9
    buf = AudioBuffer(samples=samples, sample_rate=rate)
    peaks = energy_peaks(buf, window=0.05, threshold=0.5)
    assert len(peaks) == 1
    assert peaks.times[0] == pytest.approx(0.5, abs=0.05)


def test_peaks_two_clicks_and_min_gap():
    rate = 8000
    samples = np.zeros((2, 2 * rate))
    samples[:, 4000:4080] = 0.9
    samples[:, 12000:12080] = 0.8
    buf = AudioBuffer(samples=samples, sample_rate=rate)
    peaks = energy_peaks(buf, window=0.05, threshold=0.5)
    assert len(peaks) == 2
    assert np.all(np.diff(peaks.times) >= 0.05)
    # A min gap wider than the click spacing suppresses the weaker click.
    wide = energy_peaks(buf, window=1.5, threshold=0.1)
    assert len(wide) == 1


def test_peaks_threshold_filters():
    env = np.array([0.0, 1.0, 0.0, 0.3, 0.0])
    tall_only = energy_peaks(env, window=0.1, threshold=0.5, frame_rate=10.0)
    assert len(tall_only) == 1
    both = energy_peaks(env, window=0.1, threshold=0.2, frame_rate=10.0)
    assert len(both) == 2
    np.testing.assert_allclose(both.times, [0.15, 0.35])  # centers (k + 0.5) / rate


def test_peaks_raw_envelope_requires_rate():
    with pytest.raises(ValueError):
        energy_peaks(np.array([0.0, 1.0, 0.0]), window=0.1)


def test_peaks_parameter_validation():
    env = np.array([0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        energy_peaks(env, window=0.0, frame_rate=10.0)
    with pytest.raises(ValueError):
        energy_peaks(env, window=0.1, threshold=0.0, frame_rate=10.0)
    with pytest.raises(ValueError):
        energy_peaks(env, window=0.1, threshold=1.5, frame_rate=10.0)


def test_av_align_identical_sets():
    peaks = PeakList(times=np.array([0.5, 1.5, 2.5]))
    assert av_align(peaks, peaks, tolerance=0.1) == 1.0


def test_av_align_disjoint_sets():
    a = PeakList(times=np.array([0.0, 1.0]))
    v = PeakList(times=np.array([0.5, 1.5]))
    assert av_align(a, v, tolerance=0.1) == 0.0


def test_av_align_worked_example():
    # 2 matches out of |A|=3, |V|=3: 2 / (3 + 3 - 2) = 0.5.
    a = PeakList(times=np.array([1.0, 2.0, 3.0]))
    v = PeakList(times=np.array([1.05, 2.04, 5.0]))
    assert av_align(a, v, tolerance=0.1) == pytest.approx(0.5)


def test_av_align_each_peak_matches_once():
    a = PeakList(times=np.array([1.0]))
    v = PeakList(times=np.array([0.95, 1.05]))
    # One audio peak can absorb only one of the two video peaks.
    assert av_align(a, v, tolerance=0.2) == pytest.approx(1 / 2)


def test_av_align_empty_cases():
    empty = PeakList(times=np.array([]))
    some = PeakList(times=np.array([1.0]))
    assert av_align(empty, empty) == 1.0
    assert av_align(empty, some) == 0.0
    with pytest.raises(ValueError):
        av_align(some, some, tolerance=0.0)


def test_av_align_monotone_in_tolerance():
    a = PeakList(times=np.array([1.0, 2.0, 3.0]))
    v = PeakList(times=np.array([1.2, 2.3, 3.4]))
    scores = [av_align(a, v, tolerance=tol) for tol in (0.1, 0.25, 0.35, 0.5)]
    assert scores == sorted(scores)
