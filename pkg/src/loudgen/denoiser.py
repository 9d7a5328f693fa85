"""Diffusion-transformer denoiser with cross-attention over the condition.

Latent frames are tokens (patch size 1 along time). Each pre-norm block
runs self-attention, cross-attention against the assembled 8M x d
condition, then a feed-forward layer. Continuous time enters as a learned
embedding added to every token; the output projection is zero-initialized
so a fresh model is exactly the zero function.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from . import diffusion
from .errors import DimensionError, DivergenceError


@dataclass
class DenoiserConfig:
    """Toy-scale defaults; production-scale settings (20-24 blocks, 24 heads)
    are recorded in README metadata only."""

    latent_channels: int
    max_frames: int
    cond_rows: int
    cond_dim: int
    blocks: int = 4
    heads: int = 4
    embed_dim: int = 64
    mlp_ratio: float = 4.0
    time_features: int = 16

    def __post_init__(self):
        counts = {
            "blocks": self.blocks,
            "heads": self.heads,
            "embed_dim": self.embed_dim,
            "latent_channels": self.latent_channels,
            "max_frames": self.max_frames,
            "cond_rows": self.cond_rows,
            "cond_dim": self.cond_dim,
        }
        for name, value in counts.items():
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if self.embed_dim % self.heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )
        if self.time_features % 2 != 0:
            raise ValueError("time_features must be even (sin/cos pairs)")

    @property
    def mlp_hidden(self) -> int:
        return int(self.mlp_ratio * self.embed_dim)


class TimeEmbedding(nn.Module):
    """Sinusoidal featurization of continuous t followed by a small MLP."""

    def __init__(self, time_features: int, embed_dim: int):
        super().__init__()
        rates = torch.logspace(0, 3, time_features // 2) * torch.pi
        self.register_buffer("rates", rates)
        self.mlp = nn.Sequential(
            nn.Linear(time_features, embed_dim),
            nn.SiLU(),
            nn.Linear(embed_dim, embed_dim),
        )

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        phases = t.reshape(-1, 1) * self.rates
        return self.mlp(torch.cat([torch.sin(phases), torch.cos(phases)], dim=1))


class DiTBlock(nn.Module):
    def __init__(self, config: DenoiserConfig):
        super().__init__()
        e = config.embed_dim
        self.norm_self = nn.LayerNorm(e)
        self.self_attn = nn.MultiheadAttention(e, config.heads, batch_first=True)
        self.norm_cross = nn.LayerNorm(e)
        self.cross_attn = nn.MultiheadAttention(
            e, config.heads, kdim=config.cond_dim, vdim=config.cond_dim, batch_first=True
        )
        self.norm_mlp = nn.LayerNorm(e)
        self.mlp = nn.Sequential(
            nn.Linear(e, config.mlp_hidden),
            nn.GELU(),
            nn.Linear(config.mlp_hidden, e),
        )

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        h = self.norm_self(x)
        x = x + self.self_attn(h, h, h, need_weights=False)[0]
        h = self.norm_cross(x)
        x = x + self.cross_attn(h, cond, cond, need_weights=False)[0]
        return x + self.mlp(self.norm_mlp(x))


class DiTDenoiser(nn.Module):
    """Predicts v (or epsilon) with the same shape as the latent input."""

    def __init__(self, config: DenoiserConfig):
        super().__init__()
        self.config = config
        e = config.embed_dim
        self.in_proj = nn.Linear(config.latent_channels, e)
        self.pos_embed = nn.Parameter(torch.zeros(config.max_frames, e))
        # Condition rows carry no inherent order, so give them positions too.
        self.cond_pos = nn.Parameter(torch.zeros(config.cond_rows, config.cond_dim))
        self.time_embed = TimeEmbedding(config.time_features, e)
        self.dit_blocks = nn.ModuleList(DiTBlock(config) for _ in range(config.blocks))
        self.out_proj = nn.Linear(e, config.latent_channels)

    @classmethod
    def init(cls, config: DenoiserConfig, seed: int) -> "DiTDenoiser":
        """Deterministic initialization: scaled-normal weights, unit norms,
        zero biases, and a zero output projection."""
        model = cls(config)
        gen = torch.Generator().manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
        with torch.no_grad():
            for name, p in model.named_parameters():
                if name.startswith("out_proj."):
                    p.zero_()
                elif p.ndim >= 2:
                    p.copy_(torch.randn(p.shape, generator=gen) * 0.02)
                elif name.endswith("weight"):
                    p.fill_(1.0)  # layer-norm gains
                else:
                    p.zero_()
        return model

    def forward(self, z_t: torch.Tensor, t, cond: torch.Tensor) -> torch.Tensor:
        batched = z_t.ndim == 3
        if not batched:
            z_t = z_t.unsqueeze(0)
        if cond.ndim == 2:
            cond = cond.unsqueeze(0).expand(z_t.shape[0], -1, -1)
        cfg = self.config
        b, c, f = z_t.shape
        if c != cfg.latent_channels:
            raise DimensionError(f"latent has {c} channels, config says {cfg.latent_channels}")
        if f > cfg.max_frames:
            raise DimensionError(f"{f} frames exceeds max_frames {cfg.max_frames}")
        if tuple(cond.shape[1:]) != (cfg.cond_rows, cfg.cond_dim):
            raise DimensionError(
                f"condition shape {tuple(cond.shape[1:])} != "
                f"({cfg.cond_rows}, {cfg.cond_dim})"
            )
        if not torch.all(torch.isfinite(z_t)):
            raise DivergenceError("non-finite latent input to denoiser")

        t = torch.as_tensor(t, dtype=z_t.dtype)
        if t.ndim == 0:
            t = t.expand(b)
        cond = cond.to(z_t.dtype) + self.cond_pos.to(z_t.dtype)

        x = self.in_proj(z_t.transpose(1, 2))
        x = x + self.pos_embed[:f] + self.time_embed(t).unsqueeze(1)
        for block in self.dit_blocks:
            x = block(x, cond)
        out = self.out_proj(x).transpose(1, 2)
        return out if batched else out.squeeze(0)


def param_count(config: DenoiserConfig) -> int:
    """Closed-form parameter count; must match direct enumeration.

    Cross-attention packs q/k/v into one matrix when cond_dim equals
    embed_dim and keeps separate projections otherwise.
    """
    e = config.embed_dim
    d = config.cond_dim
    h = config.mlp_hidden
    c = config.latent_channels
    tf = config.time_features

    self_attn = 3 * e * e + 3 * e + e * e + e
    if d == e:
        cross_attn = self_attn
    else:
        cross_attn = e * e + 2 * e * d + 3 * e + e * e + e
    mlp = e * h + h + h * e + e
    norms = 3 * 2 * e
    per_block = self_attn + cross_attn + mlp + norms

    time_embed = tf * e + e + e * e + e
    in_proj = c * e + e
    out_proj = e * c + c
    pos = config.max_frames * e + config.cond_rows * d
    return config.blocks * per_block + time_embed + in_proj + out_proj + pos


def train_step(
    model: DiTDenoiser,
    builder,
    optimizer: torch.optim.Optimizer,
    batch,
    rng,
    objective: str = "v",
    loss_ceiling: float = 1e6,
) -> float:
    """One optimizer step on a batch of ConditionedLatent examples."""
    optimizer.zero_grad()
    loss = diffusion.training_loss(model, builder, batch, rng, objective)
    value = loss.detach().item()
    if not torch.isfinite(loss) or value > loss_ceiling:
        raise DivergenceError(f"training loss diverged: {value}")
    loss.backward()
    optimizer.step()
    return value
