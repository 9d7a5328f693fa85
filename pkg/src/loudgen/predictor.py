"""Visual-feature to loudness regression (the T_LUFS path).

A pluggable frame backbone turns video frames into per-frame feature
vectors at the LUFS cadence (6 per second), and a small transformer
encoder regresses the two-channel normalized loudness series from them.
The shipped backbone is synthetic: it maps a scalar per-frame brightness
onto a fixed deterministic feature vector, which gives a closed-loop
oracle task (brightness -> loudness) for training and evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
import torch
from torch import nn

from .errors import InsufficientDataError
from .meter import NormalizedSeries

DEFAULT_FPS = 6.0
MAX_TOKENS = 360  # 60 s at 6 FPS


@dataclass
class FrameFeatureSeq:
    """Per-frame features: T x d_f at a fixed frame rate."""

    fps: float
    features: np.ndarray
    source: str = "synthetic"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise InsufficientDataError(
                f"features must be a nonempty T x d matrix, got shape {self.features.shape}"
            )


class FrameSource(Protocol):
    duration: float

    def frame_values(self, times: np.ndarray) -> np.ndarray: ...


@dataclass
class SyntheticFrameSource:
    """A 'video' reduced to a piecewise-linear scalar brightness track."""

    times: np.ndarray
    brightness: np.ndarray
    duration: float

    def frame_values(self, times: np.ndarray) -> np.ndarray:
        return np.interp(times, self.times, self.brightness)


class BrightnessBackbone:
    """Deterministic per-frame featurizer: brightness scalar -> d_f vector.

    Each feature is sin(rate * b + phase) with fixed rates and phases, so
    equal brightnesses give identical rows and the map is strictly local
    to each frame.
    """

    def __init__(self, feature_dim: int = 16):
        self.feature_dim = feature_dim
        rng = np.random.default_rng(0x10AD)
        self.rates = rng.uniform(0.5, 6.0, feature_dim) * np.pi
        self.phases = rng.uniform(0.0, 2.0 * np.pi, feature_dim)

    def featurize(self, brightness: np.ndarray) -> np.ndarray:
        brightness = np.asarray(brightness, dtype=np.float64)
        return np.sin(brightness[:, np.newaxis] * self.rates + self.phases)


def extract_features(
    source: FrameSource,
    fps: float = DEFAULT_FPS,
    backbone: BrightnessBackbone | None = None,
) -> FrameFeatureSeq:
    """Sample the source at frame times k/fps and featurize each frame."""
    if backbone is None:
        backbone = BrightnessBackbone()
    n_frames = int(np.floor(source.duration * fps))
    if n_frames < 1:
        raise InsufficientDataError("source too short for one frame")
    times = np.arange(n_frames) / fps
    return FrameFeatureSeq(fps=fps, features=backbone.featurize(source.frame_values(times)))


@dataclass
class RegressorConfig:
    """Toy defaults; the production-scale 12-layer/8-head/768-dim encoder is
    recorded in README metadata only."""

    feature_dim: int = 16
    layers: int = 2
    heads: int = 4
    embed_dim: int = 128
    ffn_dim: int = 256
    max_tokens: int = MAX_TOKENS


class LufsRegressor(nn.Module):
    """Transformer encoder over frame features, sigmoid head onto [0, 1]^2.

    The head is zero-initialized, so an untrained model predicts the 0.5
    midpoint everywhere.
    """

    def __init__(self, config: RegressorConfig, seed: int = 0):
        super().__init__()
        self.config = config
        self.in_proj = nn.Linear(config.feature_dim, config.embed_dim)
        self.pos_embed = nn.Parameter(torch.zeros(config.max_tokens, config.embed_dim))
        layer = nn.TransformerEncoderLayer(
            d_model=config.embed_dim,
            nhead=config.heads,
            dim_feedforward=config.ffn_dim,
            dropout=0.0,
            batch_first=True,
            norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=config.layers, enable_nested_tensor=False
        )
        self.head = nn.Linear(config.embed_dim, 2)
        gen = torch.Generator().manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
        with torch.no_grad():
            for name, p in self.named_parameters():
                if name.startswith("head."):
                    p.zero_()
                elif p.ndim >= 2:
                    p.copy_(torch.randn(p.shape, generator=gen) * 0.02)
                elif name.endswith("weight"):
                    p.fill_(1.0)
                else:
                    p.zero_()

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        """feats: (B, T, d_f) -> (B, T, 2) in [0, 1]."""
        t = feats.shape[1]
        if t > self.config.max_tokens:
            raise ValueError(
                f"sequence of {t} frames exceeds the {self.config.max_tokens}-token limit"
            )
        x = self.in_proj(feats) + self.pos_embed[:t]
        return torch.sigmoid(self.head(self.encoder(x)))


def predict(model: LufsRegressor, feats: FrameFeatureSeq) -> tuple[NormalizedSeries, NormalizedSeries]:
    """Predict the two-channel normalized loudness series for one sequence."""
    with torch.no_grad():
        out = model(torch.as_tensor(feats.features, dtype=torch.float32).unsqueeze(0))
    values = out.squeeze(0).numpy().astype(np.float64)
    return (
        NormalizedSeries(channel="left", values=values[:, 0]),
        NormalizedSeries(channel="right", values=values[:, 1]),
    )


def train_regressor(
    dataset: list[tuple[FrameFeatureSeq, tuple[NormalizedSeries, NormalizedSeries]]],
    epochs: int,
    seed: int = 0,
    lr: float = 2e-3,
    batch_size: int | None = None,
    config: RegressorConfig | None = None,
) -> tuple[LufsRegressor, list[float]]:
    """Fit a regressor with MSE; returns (model, per-epoch loss curve).

    batch_size None means full batch. All sequences must share one length
    (the synthetic task uses a fixed duration).
    """
    if not dataset:
        raise InsufficientDataError("empty training dataset")
    if config is None:
        config = RegressorConfig(feature_dim=dataset[0][0].features.shape[1])

    feats = torch.as_tensor(
        np.stack([ex[0].features for ex in dataset]), dtype=torch.float32
    )
    targets = torch.as_tensor(
        np.stack(
            [np.stack([ex[1][0].values, ex[1][1].values], axis=1) for ex in dataset]
        ),
        dtype=torch.float32,
    )
    if targets.min() < 0 or targets.max() > 1:
        raise ValueError("targets must be normalized to [0, 1]")

    model = LufsRegressor(config, seed=seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    rng = np.random.default_rng(seed)
    n = feats.shape[0]
    curve = []
    for _ in range(epochs):
        order = rng.permutation(n) if batch_size else np.arange(n)
        step = batch_size or n
        epoch_loss = 0.0
        for start in range(0, n, step):
            idx = order[start : start + step]
            optimizer.zero_grad()
            pred = model(feats[idx])
            loss = torch.mean((pred - targets[idx]) ** 2)
            if not torch.isfinite(loss):
                raise RuntimeError("regressor training diverged")
            loss.backward()
            optimizer.step()
            epoch_loss += loss.detach().item() * len(idx)
        curve.append(epoch_loss / n)
    return model, curve
