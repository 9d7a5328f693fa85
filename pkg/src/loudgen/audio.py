"""Stereo audio buffers, RIFF/WAVE I/O, and deterministic test-signal synthesis.

All audio is held internally as float64 arrays of shape ``(channels, frames)``
with samples nominally in [-1, 1]. The WAV layer speaks little-endian RIFF
with PCM 16-bit, PCM 24-bit, and IEEE float32 sample encodings; everything
else is rejected rather than guessed at.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import AudioFormatError, ChannelCountError, UnsupportedCodecError

# Integer scale shared by read and write so that a PCM16 round trip is the
# identity on the quantized lattice and the quantization error of a single
# trip is bounded by 0.5 / _PCM16_SCALE < 2**-15.
_PCM16_SCALE = 32767.0
_PCM24_SCALE = 8388607.0

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioBuffer:
    """In-memory audio: ``samples`` is float64 with shape (channels, frames)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim == 1:
            self.samples = self.samples[np.newaxis, :]
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got ndim={self.samples.ndim}")
        if self.samples.shape[0] not in (1, 2):
            raise ChannelCountError(f"expected 1 or 2 channels, got {self.samples.shape[0]}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.frames / self.sample_rate


@dataclass
class WriteReport:
    """Outcome of a write_wav call."""

    path: str
    encoding: str
    clipped_samples: int


@dataclass
class SignalSpec:
    """Description of a synthetic signal.

    kind is one of 'sine', 'silence', 'white_noise', 'envelope_modulated'.
    For noise kinds, ``frequency`` is the upper band edge in Hz (None means
    full band) and ``amplitude`` sets the 3-sigma level of the Gaussian
    samples. ``envelope`` is a piecewise-linear (time_s, linear_gain) curve
    applied multiplicatively; it is required for 'envelope_modulated' and
    optional elsewhere.
    """

    kind: str
    duration: float
    amplitude: float = 1.0
    frequency: float | None = None
    envelope: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sine", "silence", "white_noise", "envelope_modulated"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError(f"amplitude must be in [0, 1], got {self.amplitude}")
        if self.kind == "sine" and (self.frequency is None or self.frequency <= 0):
            raise ValueError("sine requires a positive frequency")
        if self.kind == "envelope_modulated" and not self.envelope:
            raise ValueError("envelope_modulated requires an envelope curve")


def synth_signal(
    spec: SignalSpec,
    sample_rate: int,
    channels: int = 2,
    seed: int = 0,
) -> AudioBuffer:
    """Render a SignalSpec to an AudioBuffer, deterministically for a given seed.

    Sine signals start at phase zero. Noise is Gaussian with a standard
    deviation of amplitude / 3 per channel (independent channels), optionally
    band-limited below ``frequency`` by zeroing FFT bins.
    """
    if channels not in (1, 2):
        raise ChannelCountError(f"expected 1 or 2 channels, got {channels}")
    n = int(round(spec.duration * sample_rate))
    if n <= 0:
        raise ValueError("duration too short for this sample rate")
    nyquist = sample_rate / 2.0

    if spec.kind == "silence":
        data = np.zeros((channels, n))
    elif spec.kind == "sine":
        if spec.frequency >= nyquist:
            raise ValueError(
                f"sine frequency {spec.frequency} Hz not below Nyquist {nyquist} Hz"
            )
        t = np.arange(n) / sample_rate
        tone = spec.amplitude * np.sin(2.0 * np.pi * spec.frequency * t)
        data = np.tile(tone, (channels, 1))
    else:
        if spec.frequency is not None and spec.frequency > nyquist:
            raise ValueError(
                f"noise band edge {spec.frequency} Hz above Nyquist {nyquist} Hz"
            )
        rng = np.random.default_rng(seed)
        data = rng.standard_normal((channels, n)) * (spec.amplitude / 3.0)
        if spec.frequency is not None and spec.frequency < nyquist:
            spectrum = np.fft.rfft(data, axis=1)
            freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
            spectrum[:, freqs > spec.frequency] = 0.0
            kept = np.count_nonzero(freqs <= spec.frequency)
            data = np.fft.irfft(spectrum, n=n, axis=1)
            # Renormalize so band limiting does not change the sample variance.
            if 0 < kept < freqs.size:
                data *= np.sqrt(freqs.size / kept)

    if spec.envelope:
        times = np.array([p[0] for p in spec.envelope], dtype=np.float64)
        gains = np.array([p[1] for p in spec.envelope], dtype=np.float64)
        if np.any(np.diff(times) < 0):
            raise ValueError("envelope times must be non-decreasing")
        t = np.arange(n) / sample_rate
        data = data * np.interp(t, times, gains)

    return AudioBuffer(samples=data, sample_rate=sample_rate)


def _read_exact(fh, size: int, what: str) -> bytes:
    raw = fh.read(size)
    if len(raw) != size:
        raise AudioFormatError(f"truncated file while reading {what}")
    return raw


def read_wav(path: str) -> AudioBuffer:
    """Read a RIFF/WAVE file into an AudioBuffer.

    Accepts PCM 16-bit, PCM 24-bit, and IEEE float32 data, mono or stereo.
    Integer samples are scaled onto [-1, 1] and clamped; float data is used
    as stored.
    """
    with open(path, "rb") as fh:
        header = _read_exact(fh, 12, "RIFF header")
        if header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

        fmt = None
        data = None
        while True:
            chunk_header = fh.read(8)
            if len(chunk_header) < 8:
                break
            chunk_id, chunk_size = struct.unpack("<4sI", chunk_header)
            if chunk_id == b"fmt ":
                fmt = _read_exact(fh, chunk_size, "fmt chunk")
            elif chunk_id == b"data":
                data = _read_exact(fh, chunk_size, "data chunk")
            else:
                fh.seek(chunk_size, 1)
            if chunk_size % 2:  # chunks are word aligned
                fh.seek(1, 1)
            if fmt is not None and data is not None:
                break

    if fmt is None or len(fmt) < 16:
        raise AudioFormatError(f"{path}: missing or short fmt chunk")
    if data is None:
        raise AudioFormatError(f"{path}: missing data chunk")

    tag, n_channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 26:
            raise AudioFormatError(f"{path}: short WAVE_FORMAT_EXTENSIBLE fmt chunk")
        tag = struct.unpack("<H", fmt[24:26])[0]
    if n_channels not in (1, 2):
        raise ChannelCountError(f"{path}: {n_channels} channels not supported")

    if tag == _WAVE_FORMAT_PCM and bits == 16:
        flat = np.frombuffer(data, dtype="<i2").astype(np.float64) / _PCM16_SCALE
    elif tag == _WAVE_FORMAT_PCM and bits == 24:
        raw = np.frombuffer(data, dtype=np.uint8)
        raw = raw[: (raw.size // 3) * 3].reshape(-1, 3)
        ints = (
            raw[:, 0].astype(np.int32)
            | (raw[:, 1].astype(np.int32) << 8)
            | (raw[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        flat = ints.astype(np.float64) / _PCM24_SCALE
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        flat = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedCodecError(
            f"{path}: format tag {tag:#06x} with {bits} bits is not supported"
        )

    if tag == _WAVE_FORMAT_PCM:
        flat = np.clip(flat, -1.0, 1.0)
    frames = flat.size // n_channels
    samples = flat[: frames * n_channels].reshape(frames, n_channels).T
    return AudioBuffer(samples=samples.copy(), sample_rate=sample_rate)


def write_wav(path: str, buf: AudioBuffer, encoding: str = "float32") -> WriteReport:
    """Write an AudioBuffer as RIFF/WAVE.

    encoding is 'pcm16' or 'float32'. Samples outside [-1, 1] are hard
    clipped and counted in the returned report. float32 output round trips
    bit-identically through read_wav for float32-representable samples.
    """
    if encoding not in ("pcm16", "float32"):
        raise UnsupportedCodecError(f"unknown encoding {encoding!r}")

    samples = buf.samples
    clipped = int(np.count_nonzero((samples < -1.0) | (samples > 1.0)))
    samples = np.clip(samples, -1.0, 1.0)
    interleaved = samples.T.reshape(-1)

    if encoding == "pcm16":
        payload = np.round(interleaved * _PCM16_SCALE).astype("<i2").tobytes()
        tag, bits = _WAVE_FORMAT_PCM, 16
    else:
        payload = interleaved.astype("<f4").tobytes()
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32

    block_align = buf.channels * bits // 8
    fmt = struct.pack(
        "<HHIIHH",
        tag,
        buf.channels,
        buf.sample_rate,
        buf.sample_rate * block_align,
        block_align,
        bits,
    )
    with open(path, "wb") as fh:
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload)))
        fh.write(b"WAVE")
        fh.write(struct.pack("<4sI", b"fmt ", len(fmt)))
        fh.write(fmt)
        fh.write(struct.pack("<4sI", b"data", len(payload)))
        fh.write(payload)

    return WriteReport(path=path, encoding=encoding, clipped_samples=clipped)
