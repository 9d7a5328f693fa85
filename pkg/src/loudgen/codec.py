"""Waveform-to-latent codecs for stereo audio.

The default codec is exact frame stacking: each channel's samples are
grouped r at a time into latent channels, so a stereo signal of L frames
becomes a (2r) x ceil(L/r) latent with zero end padding. It is linear and
perfectly invertible, which isolates diffusion behavior from codec error.

A small trained convolutional autoencoder (strided conv encoder, transposed
conv decoder, plain L2 reconstruction loss) is provided behind the same
interface as the lossy alternative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .audio import AudioBuffer
from .errors import ChannelCountError, ContainerError

from . import containers


@dataclass
class Latent:
    """Compact representation z0: data has shape (channels, frames)."""

    data: np.ndarray
    downsample_factor: int
    source_rate: int
    unpadded_length: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"latent data must be 2-D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("latent contains non-finite entries")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def compression_ratio(self) -> float:
        """Source values per stored value, ignoring end padding: 2r / C."""
        return 2.0 * self.downsample_factor / self.channels

    def save(self, path: str) -> None:
        containers.write_latent(
            path, self.data, self.downsample_factor, self.source_rate, self.unpadded_length
        )

    @classmethod
    def load(cls, path: str) -> "Latent":
        record = containers.read_latent(path)
        return cls(
            data=record["data"],
            downsample_factor=record["downsample_factor"],
            source_rate=record["source_rate"],
            unpadded_length=record["unpadded_length"],
        )


class FrameStackCodec:
    """Exact invertible codec: C = 2r latent channels, frames = ceil(L/r).

    Latent channel c*r + k at frame f holds source channel c's sample at
    index f*r + k, with zeros past the stored unpadded length.
    """

    def __init__(self, downsample_factor: int):
        if downsample_factor < 2 or downsample_factor % 2 != 0:
            raise ValueError(
                f"downsample factor must be a positive even integer, got {downsample_factor}"
            )
        self.downsample_factor = downsample_factor

    @property
    def latent_channels(self) -> int:
        return 2 * self.downsample_factor

    def encode(self, buf: AudioBuffer) -> Latent:
        if buf.channels != 2:
            raise ChannelCountError("latent codec requires stereo input")
        r = self.downsample_factor
        frames = -(-buf.frames // r)
        padded = np.zeros((2, frames * r))
        padded[:, : buf.frames] = buf.samples
        # (2, frames, r) -> (2, r, frames) -> (2r, frames)
        data = padded.reshape(2, frames, r).transpose(0, 2, 1).reshape(2 * r, frames)
        return Latent(
            data=data,
            downsample_factor=r,
            source_rate=buf.sample_rate,
            unpadded_length=buf.frames,
        )

    def decode(self, z: Latent) -> AudioBuffer:
        r = z.downsample_factor
        if z.channels != 2 * r:
            raise ContainerError(
                f"latent has {z.channels} channels, expected {2 * r} for factor {r}"
            )
        if not 0 <= z.unpadded_length <= z.frames * r:
            raise ContainerError(
                f"unpadded length {z.unpadded_length} outside [0, {z.frames * r}]"
            )
        samples = (
            z.data.reshape(2, r, z.frames).transpose(0, 2, 1).reshape(2, z.frames * r)
        )
        return AudioBuffer(
            samples=samples[:, : z.unpadded_length].copy(), sample_rate=z.source_rate
        )


class ConvCodec(nn.Module):
    """Lossy learned codec with the same encode/decode surface.

    One strided Conv1d maps (2, L) onto (C, ceil(L/r)); a ConvTranspose1d
    maps back. fit() minimizes plain L2 reconstruction error.
    """

    def __init__(self, downsample_factor: int, latent_channels: int | None = None, seed: int = 0):
        super().__init__()
        if downsample_factor < 2 or downsample_factor % 2 != 0:
            raise ValueError(
                f"downsample factor must be a positive even integer, got {downsample_factor}"
            )
        self.downsample_factor = downsample_factor
        self.latent_channels = latent_channels or 2 * downsample_factor
        r = downsample_factor
        self.encoder = nn.Conv1d(2, self.latent_channels, kernel_size=r, stride=r)
        self.decoder = nn.ConvTranspose1d(self.latent_channels, 2, kernel_size=r, stride=r)
        gen = torch.Generator().manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
        with torch.no_grad():
            for p in self.parameters():
                p.copy_(torch.randn(p.shape, generator=gen) * 0.05)

    def _padded(self, buf: AudioBuffer) -> torch.Tensor:
        r = self.downsample_factor
        frames = -(-buf.frames // r)
        padded = np.zeros((2, frames * r))
        padded[:, : buf.frames] = buf.samples
        return torch.as_tensor(padded, dtype=torch.float32)

    def encode(self, buf: AudioBuffer) -> Latent:
        if buf.channels != 2:
            raise ChannelCountError("latent codec requires stereo input")
        with torch.no_grad():
            z = self.encoder(self._padded(buf).unsqueeze(0)).squeeze(0)
        return Latent(
            data=z.numpy().astype(np.float64),
            downsample_factor=self.downsample_factor,
            source_rate=buf.sample_rate,
            unpadded_length=buf.frames,
        )

    def decode(self, z: Latent) -> AudioBuffer:
        with torch.no_grad():
            x = self.decoder(
                torch.as_tensor(z.data, dtype=torch.float32).unsqueeze(0)
            ).squeeze(0)
        samples = x.numpy().astype(np.float64)[:, : z.unpadded_length]
        return AudioBuffer(samples=samples.copy(), sample_rate=z.source_rate)

    def fit(self, buffers: list[AudioBuffer], epochs: int = 50, lr: float = 1e-3) -> list[float]:
        """Train on full batches of equal-length buffers; returns the loss curve."""
        batch = torch.stack([self._padded(b) for b in buffers])
        optimizer = torch.optim.Adam(self.parameters(), lr=lr)
        losses = []
        for _ in range(epochs):
            optimizer.zero_grad()
            recon = self.decoder(self.encoder(batch))
            loss = torch.mean((recon - batch) ** 2)
            loss.backward()
            optimizer.step()
            losses.append(loss.detach().item())
        return losses
