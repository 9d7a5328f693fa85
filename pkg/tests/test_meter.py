import numpy as np
import pytest

from loudgen.audio import AudioBuffer, SignalSpec, synth_signal
from loudgen.errors import UndefinedLoudnessError
from loudgen.meter import LufsSeries, clip_normalize, integrated_lufs, momentary_lufs


def _sine(amplitude=1.0, duration=3.0, rate=48000, channels=2):
    return synth_signal(
        SignalSpec(kind="sine", frequency=997.0, duration=duration, amplitude=amplitude),
        rate, channels,
    )


def test_momentary_count_and_cadence():
    series = momentary_lufs(_sine(duration=3.0, rate=44100))
    assert len(series) == 2
    assert [s.channel for s in series] == ["left", "right"]
    for s in series:
        assert s.values.size == 18  # 6 windows per second
        assert s.window_seconds == pytest.approx(1 / 6)
        assert np.allclose(s.times, np.arange(18) / 6)


def test_momentary_full_scale_sine_value():
    series = momentary_lufs(_sine(channels=1))
    # Full-scale 997 Hz per channel sits at the -3.01 LUFS compliance point.
    assert np.all(np.abs(series[0].values - (-3.0103)) < 0.1)


def test_momentary_gain_shift():
    loud = momentary_lufs(_sine(amplitude=1.0))[0].values
    soft = momentary_lufs(_sine(amplitude=0.5))[0].values
    np.testing.assert_allclose(loud - soft, 20 * np.log10(2.0), atol=1e-6)


def test_momentary_silence_is_neg_inf():
    buf = synth_signal(SignalSpec(kind="silence", duration=1.0), 48000, 2)
    for s in momentary_lufs(buf):
        assert np.all(np.isneginf(s.values))


def test_momentary_channel_permutation():
    rng = np.random.default_rng(5)
    left = rng.standard_normal(48000) * 0.1
    right = rng.standard_normal(48000) * 0.3
    buf = AudioBuffer(samples=np.stack([left, right]), sample_rate=48000)
    flipped = AudioBuffer(samples=np.stack([right, left]), sample_rate=48000)
    a = momentary_lufs(buf)
    b = momentary_lufs(flipped)
    assert np.array_equal(a[0].values, b[1].values)
    assert np.array_equal(a[1].values, b[0].values)


def test_momentary_too_short_rejected():
    buf = synth_signal(SignalSpec(kind="silence", duration=0.1), 48000, 1)
    with pytest.raises(ValueError):
        momentary_lufs(buf)


def test_integrated_single_channel_compliance():
    # Left-only stereo and mono both measure the BS.1770 -3.01 case.
    mono = integrated_lufs(_sine(channels=1))
    assert mono == pytest.approx(-3.01, abs=0.1)
    stereo = _sine(channels=2)
    stereo.samples[1] = 0.0
    assert integrated_lufs(stereo) == pytest.approx(mono, abs=1e-6)


def test_integrated_channel_summation():
    single = integrated_lufs(_sine(channels=1))
    dual = integrated_lufs(_sine(channels=2))
    assert dual - single == pytest.approx(10 * np.log10(2.0), abs=1e-6)


def test_integrated_gating_drops_quiet_tail():
    rate = 48000
    loud = _sine(amplitude=0.5, duration=3.0, rate=rate, channels=1)
    quiet = _sine(amplitude=0.001, duration=3.0, rate=rate, channels=1)
    combined = AudioBuffer(
        samples=np.concatenate([loud.samples, quiet.samples], axis=1), sample_rate=rate
    )
    gated = integrated_lufs(combined)
    # The quiet half sits ~54 dB below and is relative-gated away.
    assert gated == pytest.approx(integrated_lufs(loud), abs=0.3)
    # Without gating the value would be ~3 dB lower (half the power).
    assert gated > integrated_lufs(loud) - 1.0


def test_integrated_undefined_for_silence():
    buf = synth_signal(SignalSpec(kind="silence", duration=1.0), 48000, 2)
    with pytest.raises(UndefinedLoudnessError):
        integrated_lufs(buf)


def test_integrated_needs_400ms():
    buf = synth_signal(SignalSpec(kind="silence", duration=0.3), 48000, 2)
    with pytest.raises(ValueError):
        integrated_lufs(buf)


def test_clip_normalize_endpoints():
    series = LufsSeries(
        channel="left", window_seconds=1 / 6, hop_seconds=1 / 6,
        values=np.array([-np.inf, -70.0, -35.0, 0.0, 5.0]),
    )
    normalized = clip_normalize(series)
    assert normalized.channel == "left"
    assert np.array_equal(normalized.values, [0.0, 0.0, 0.5, 1.0, 1.0])


def test_momentary_window_hop_overrides():
    buf = _sine(duration=2.0, rate=48000, channels=1)
    series = momentary_lufs(buf, window_seconds=0.4, hop_seconds=0.2)
    assert series[0].values.size == (2 * 48000 - 19200) // 9600 + 1
