"""Continuous-time variance-preserving diffusion with v-objective training.

The noise schedule is the cosine parameterization alpha_t = cos(pi*t/2),
sigma_t = sin(pi*t/2) over t in [0, 1], so alpha^2 + sigma^2 = 1 exactly
and the forward marginal is z_t = alpha*z0 + sigma*eps. Training predicts
v = alpha*eps - sigma*z0 by default (epsilon prediction is available for
comparison). Sampling is a deterministic DDIM-style pass over a uniform
time grid with classifier-free guidance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .conditioning import (
    ConditionBuilder,
    ConditionSet,
    ModalEmbedding,
    TimingPair,
    drop_all_for_cfg,
    mask_for_training,
    null_condition_like,
)
from .errors import DimensionError, DivergenceError
from .meter import NormalizedSeries


def schedule_at(t):
    """Return (alpha_t, sigma_t) for scalar or tensor t in [0, 1].

    The t = 1 endpoint is snapped to exactly (0, 1) rather than leaving the
    ~6e-17 residue of cos(pi/2).
    """
    if isinstance(t, torch.Tensor):
        if torch.any((t < 0) | (t > 1)):
            raise ValueError("t must lie in [0, 1]")
        half_pi_t = 0.5 * math.pi * t
        alpha = torch.where(t == 1.0, torch.zeros_like(t), torch.cos(half_pi_t))
        return alpha, torch.sin(half_pi_t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    alpha = 0.0 if t == 1.0 else math.cos(0.5 * math.pi * t)
    return alpha, math.sin(0.5 * math.pi * t)


def _as_factor(value, like: torch.Tensor):
    """Shape a scalar or per-batch schedule factor for broadcasting."""
    if isinstance(value, torch.Tensor) and value.ndim == 1:
        return value.reshape(-1, *([1] * (like.ndim - 1))).to(like.dtype)
    return value


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str):
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shape {tuple(a.shape)} != {tuple(b.shape)}")


def forward_sample(z0: torch.Tensor, t, eps: torch.Tensor) -> torch.Tensor:
    """Corrupt clean data: z_t = alpha_t * z0 + sigma_t * eps."""
    _check_same_shape(z0, eps, "forward_sample")
    alpha, sigma = schedule_at(t)
    return _as_factor(alpha, z0) * z0 + _as_factor(sigma, z0) * eps


def v_target(z0: torch.Tensor, eps: torch.Tensor, t) -> torch.Tensor:
    """Training target v = alpha_t * eps - sigma_t * z0."""
    _check_same_shape(z0, eps, "v_target")
    alpha, sigma = schedule_at(t)
    return _as_factor(alpha, eps) * eps - _as_factor(sigma, z0) * z0


def data_noise_from_v(z_t: torch.Tensor, v: torch.Tensor, t) -> tuple[torch.Tensor, torch.Tensor]:
    """Invert the v parameterization: z0 = a*z_t - s*v, eps = s*z_t + a*v."""
    _check_same_shape(z_t, v, "data_noise_from_v")
    alpha, sigma = schedule_at(t)
    a = _as_factor(alpha, z_t)
    s = _as_factor(sigma, z_t)
    return a * z_t - s * v, s * z_t + a * v


def data_noise_from_eps(z_t: torch.Tensor, eps: torch.Tensor, t) -> tuple[torch.Tensor, torch.Tensor]:
    """Invert epsilon prediction: z0 = (z_t - sigma*eps) / alpha. Singular at t=1."""
    _check_same_shape(z_t, eps, "data_noise_from_eps")
    alpha, sigma = schedule_at(t)
    if isinstance(alpha, torch.Tensor):
        if torch.any(alpha == 0):
            raise ValueError("epsilon parameterization is singular at t = 1")
    elif alpha == 0.0:
        raise ValueError("epsilon parameterization is singular at t = 1")
    a = _as_factor(alpha, z_t)
    s = _as_factor(sigma, z_t)
    return (z_t - s * eps) / a, eps


@dataclass
class SamplerConfig:
    steps: int = 100
    guidance_scale: float = 7.0
    seed: int = 0
    objective: str = "v"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.guidance_scale < 0:
            raise ValueError(f"guidance scale must be >= 0, got {self.guidance_scale}")
        if self.objective not in ("v", "epsilon"):
            raise ValueError(f"objective must be 'v' or 'epsilon', got {self.objective!r}")


@dataclass
class ConditionedLatent:
    """One training example: clean latent plus raw conditioning inputs."""

    z0: torch.Tensor
    lang: ModalEmbedding | None
    audio: ModalEmbedding | None
    video: ModalEmbedding | None
    lufs_left: NormalizedSeries
    lufs_right: NormalizedSeries
    timing: TimingPair


def _assembled(cond) -> torch.Tensor:
    return cond.assembled if isinstance(cond, ConditionSet) else cond


def denoising_loss(
    model, z0: torch.Tensor, t, eps: torch.Tensor, cond, objective: str = "v"
) -> torch.Tensor:
    """Squared-error denoising loss for fixed (t, eps, condition).

    Pure in its inputs, so it is the target of the finite-difference
    gradient checks; training_loss layers the sampling and condition
    dropout on top of it.
    """
    z_t = forward_sample(z0, t, eps)
    if objective == "v":
        target = v_target(z0, eps, t)
    elif objective == "epsilon":
        target = eps
    else:
        raise ValueError(f"unknown objective {objective!r}")
    pred = model(z_t, t, _assembled(cond))
    loss = torch.mean((pred - target) ** 2)
    if not torch.isfinite(loss):
        raise DivergenceError("denoising loss is non-finite")
    return loss


def training_loss(
    model,
    builder: ConditionBuilder,
    batch: list[ConditionedLatent],
    rng: np.random.Generator,
    objective: str = "v",
    modality_drop: float = 0.3,
    set_drop: float = 0.1,
) -> torch.Tensor:
    """Denoising loss over a batch with the training-time condition dropout.

    Per example: each prompt modality is independently dropped with
    probability ``modality_drop`` (the task id follows the surviving set),
    then the whole assembled condition is replaced by the null condition
    with probability ``set_drop``. Time is uniform on [0, 1] per example
    and all randomness comes from ``rng``.
    """
    if not batch:
        raise ValueError("empty batch")
    conds = []
    for ex in batch:
        lang, audio, video = mask_for_training(
            (ex.lang, ex.audio, ex.video), rng, modality_drop
        )
        cond = builder.build(lang, audio, video, ex.lufs_left, ex.lufs_right, ex.timing)
        conds.append(drop_all_for_cfg(cond, rng, set_drop).assembled)

    z0 = torch.stack([ex.z0 for ex in batch])
    t = torch.as_tensor(rng.random(len(batch)), dtype=z0.dtype)
    eps = torch.as_tensor(
        rng.standard_normal(tuple(z0.shape)), dtype=z0.dtype
    )
    return denoising_loss(model, z0, t, eps, torch.stack(conds), objective)


def cfg_predict(model, z_t: torch.Tensor, t, cond, null_cond, guidance_scale: float) -> torch.Tensor:
    """Classifier-free guidance: u + omega * (c - u) in the output space.

    omega = 1 and omega = 0 return the single conditional or unconditional
    model evaluation exactly (and skip the other call).
    """
    if guidance_scale == 1.0:
        return model(z_t, t, _assembled(cond))
    if guidance_scale == 0.0:
        return model(z_t, t, _assembled(null_cond))
    conditional = model(z_t, t, _assembled(cond))
    unconditional = model(z_t, t, _assembled(null_cond))
    return unconditional + guidance_scale * (conditional - unconditional)


def sample(
    model,
    cond,
    shape: tuple[int, int],
    config: SamplerConfig,
    null_cond=None,
) -> torch.Tensor:
    """Deterministic DDIM-style generation from pure noise.

    Walks a uniform grid from t = 1 to t = 0; at each step converts the
    guided prediction to (z0_hat, eps_hat) and re-projects onto the next
    time's marginal. The only randomness is the seeded initial noise.
    """
    if null_cond is None:
        if not isinstance(cond, ConditionSet):
            raise ValueError("null_cond is required when cond is a raw tensor")
        null_cond = null_condition_like(cond)

    rng = np.random.default_rng(config.seed)
    z = torch.as_tensor(rng.standard_normal(shape), dtype=torch.float32)
    grid = np.linspace(1.0, 0.0, config.steps + 1)
    if config.objective == "epsilon":
        # Back off the singular endpoint where alpha = 0.
        grid[0] = 1.0 - 1e-4

    with torch.no_grad():
        for step, (t_now, t_next) in enumerate(zip(grid[:-1], grid[1:])):
            pred = cfg_predict(model, z, float(t_now), cond, null_cond, config.guidance_scale)
            if config.objective == "v":
                z0_hat, eps_hat = data_noise_from_v(z, pred, float(t_now))
            else:
                z0_hat, eps_hat = data_noise_from_eps(z, pred, float(t_now))
            alpha_next, sigma_next = schedule_at(float(t_next))
            z = alpha_next * z0_hat + sigma_next * eps_hat
            if not torch.all(torch.isfinite(z)):
                raise DivergenceError(f"sampler state non-finite at step {step}")
    return z
