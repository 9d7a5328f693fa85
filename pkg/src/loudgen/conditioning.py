"""Assembly of the diffusion conditioning context E.

The context stacks three blocks along the row (sequence) dimension:

* multi-modal block (4M rows): task embedding, then language, audio, and
  video prompt embeddings, with absent modalities filled by zeros and the
  combination encoded as an 8-way task ID;
* loudness block (2M rows): per-channel normalized LUFS series resampled
  to M points each and lifted to d columns by a shared affine map;
* timing block (2M rows): start-second and total-duration scalars, each
  embedded sinusoidally and broadcast to M rows.

Total context shape is 8M x d for every input.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import torch
from torch import nn

from .errors import DimensionError, EncoderError, InsufficientDataError
from .meter import NormalizedSeries

MODALITIES = ("language", "audio", "video")


@dataclass
class ModalEmbedding:
    """One prompt modality encoded as an M x d matrix."""

    modality: str
    matrix: np.ndarray

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DimensionError(f"embedding matrix must be 2-D, got {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("embedding matrix contains non-finite entries")


@dataclass(frozen=True)
class TaskId:
    """Integer code for which prompt modalities are present."""

    id: int
    presence: tuple[bool, bool, bool]  # (language, audio, video)


@dataclass(frozen=True)
class TimingPair:
    """Segment start and total source duration, in seconds."""

    x_start: float
    x_total: float

    def __post_init__(self):
        if self.x_start < 0:
            raise ValueError(f"x_start must be >= 0, got {self.x_start}")
        if self.x_total <= 0:
            raise ValueError(f"x_total must be > 0, got {self.x_total}")
        if self.x_start > self.x_total:
            raise ValueError("x_start exceeds x_total")


@dataclass
class ConditionSet:
    """Fully assembled condition: individual blocks plus the 8M x d stack."""

    e_task: torch.Tensor
    e_lang: torch.Tensor
    e_audio: torch.Tensor
    e_video: torch.Tensor
    e_lufs: torch.Tensor
    e_timing: torch.Tensor
    presence: TaskId
    assembled: torch.Tensor


def build_task_id(lang_present: bool, audio_present: bool, video_present: bool) -> TaskId:
    """Bit-encode modality presence: language=4, audio=2, video=1."""
    code = 4 * bool(lang_present) + 2 * bool(audio_present) + 1 * bool(video_present)
    return TaskId(id=code, presence=(bool(lang_present), bool(audio_present), bool(video_present)))


class ModalEncoder(Protocol):
    modality: str

    def encode(self, payload) -> np.ndarray: ...


class SyntheticEncoder:
    """Deterministic stand-in for a pretrained multi-modal encoder.

    Hashes the payload string into an RNG seed and emits an M x d matrix
    with unit-norm rows. Real encoders plug in through the same interface.
    """

    def __init__(self, modality: str, m_tokens: int, cond_dim: int):
        if modality not in MODALITIES:
            raise ValueError(f"unknown modality {modality!r}")
        self.modality = modality
        self.m_tokens = m_tokens
        self.cond_dim = cond_dim

    def encode(self, payload) -> np.ndarray:
        digest = hashlib.sha256(f"{self.modality}:{payload}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        matrix = rng.standard_normal((self.m_tokens, self.cond_dim))
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        return matrix / norms


def encode_prompt(encoder: ModalEncoder, payload) -> ModalEmbedding:
    """Run a modal encoder and wrap its output, tagging failures by modality."""
    try:
        matrix = encoder.encode(payload)
    except Exception as exc:
        raise EncoderError(encoder.modality, f"encoder failed: {exc}") from exc
    return ModalEmbedding(modality=encoder.modality, matrix=matrix)


def resample_series(values: np.ndarray, m_tokens: int) -> np.ndarray:
    """Linearly resample a series to exactly m_tokens points, keeping endpoints."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise InsufficientDataError("series must be a nonempty 1-D sequence")
    if values.size == 1:
        return np.full(m_tokens, values[0])
    src = np.linspace(0.0, 1.0, values.size)
    dst = np.linspace(0.0, 1.0, m_tokens)
    return np.interp(dst, src, values)


def mask_for_training(
    embeddings: tuple[ModalEmbedding | None, ModalEmbedding | None, ModalEmbedding | None],
    rng: np.random.Generator,
    drop_probability: float = 0.3,
) -> tuple[ModalEmbedding | None, ModalEmbedding | None, ModalEmbedding | None]:
    """Independently drop each modality with the given probability."""
    draws = rng.random(3)
    return tuple(
        None if draws[i] < drop_probability else emb for i, emb in enumerate(embeddings)
    )


class ConditionBuilder(nn.Module):
    """Holds the learned tables and maps that turn raw inputs into E.

    Learned state: an 8-entry task-embedding table (M x d per task), the
    shared scalar-to-row affine lift for loudness values, and the linear
    map over sinusoidal features used for timing scalars.
    """

    TIMING_FEATURES = 16  # sin/cos pairs over log-spaced rates

    def __init__(self, m_tokens: int, cond_dim: int, seed: int = 0):
        super().__init__()
        if m_tokens < 1 or cond_dim < 1:
            raise ValueError("m_tokens and cond_dim must be >= 1")
        self.m_tokens = m_tokens
        self.cond_dim = cond_dim
        gen = torch.Generator().manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
        self.task_table = nn.Parameter(
            torch.randn(8, m_tokens, cond_dim, generator=gen) * 0.02
        )
        self.lufs_lift = nn.Linear(1, cond_dim)
        self.timing_map = nn.Linear(self.TIMING_FEATURES, cond_dim)
        for layer in (self.lufs_lift, self.timing_map):
            with torch.no_grad():
                layer.weight.copy_(torch.randn(layer.weight.shape, generator=gen) * 0.02)
                layer.bias.zero_()
        # Rates span multiple octaves so nearby seconds stay distinguishable.
        rates = torch.logspace(-2, 1, self.TIMING_FEATURES // 2) * 2.0 * torch.pi
        self.register_buffer("timing_rates", rates)

    def _to_tensor(self, emb: ModalEmbedding) -> torch.Tensor:
        if emb.matrix.shape != (self.m_tokens, self.cond_dim):
            raise DimensionError(
                f"{emb.modality} embedding shape {emb.matrix.shape} does not match "
                f"(M={self.m_tokens}, d={self.cond_dim})"
            )
        return torch.as_tensor(emb.matrix, dtype=self.task_table.dtype)

    def build_multimodal(
        self,
        lang: ModalEmbedding | None,
        audio: ModalEmbedding | None,
        video: ModalEmbedding | None,
    ) -> tuple[torch.Tensor, TaskId]:
        """Stack [e_task; e_lang; e_audio; e_video] with zero fill for absences."""
        task = build_task_id(lang is not None, audio is not None, video is not None)
        mask_fill = torch.zeros(
            self.m_tokens, self.cond_dim, dtype=self.task_table.dtype
        )
        rows = [self.task_table[task.id]]
        for emb in (lang, audio, video):
            rows.append(mask_fill if emb is None else self._to_tensor(emb))
        return torch.cat(rows, dim=0), task

    def build_lufs(self, left: NormalizedSeries, right: NormalizedSeries) -> torch.Tensor:
        """Resample both channels to M points and lift each scalar to a d-row."""
        blocks = []
        for series in (left, right):
            values = np.asarray(series.values, dtype=np.float64)
            if values.size == 0:
                raise InsufficientDataError(f"empty loudness series for {series.channel}")
            if values.min() < 0.0 or values.max() > 1.0:
                raise ValueError("normalized loudness values must lie in [0, 1]")
            points = torch.as_tensor(
                resample_series(values, self.m_tokens), dtype=self.task_table.dtype
            )
            blocks.append(self.lufs_lift(points.unsqueeze(1)))
        return torch.cat(blocks, dim=0)

    def _embed_seconds(self, seconds: float) -> torch.Tensor:
        phases = self.timing_rates * seconds
        feats = torch.cat([torch.sin(phases), torch.cos(phases)])
        return self.timing_map(feats)

    def build_timing(self, timing: TimingPair) -> torch.Tensor:
        """Rows [0..M) embed x_start, rows [M..2M) embed x_total."""
        start_row = self._embed_seconds(timing.x_start)
        total_row = self._embed_seconds(timing.x_total)
        return torch.cat(
            [start_row.expand(self.m_tokens, -1), total_row.expand(self.m_tokens, -1)],
            dim=0,
        )

    def assemble(
        self, multimodal: torch.Tensor, lufs: torch.Tensor, timing: torch.Tensor, task: TaskId
    ) -> ConditionSet:
        """Row-stack [E_M; E_L; E_T] into the 8M x d context."""
        m = self.m_tokens
        expected = {
            "multimodal": (4 * m, self.cond_dim),
            "lufs": (2 * m, self.cond_dim),
            "timing": (2 * m, self.cond_dim),
        }
        for name, tensor in (("multimodal", multimodal), ("lufs", lufs), ("timing", timing)):
            if tuple(tensor.shape) != expected[name]:
                raise DimensionError(
                    f"{name} block shape {tuple(tensor.shape)} != {expected[name]}"
                )
        assembled = torch.cat([multimodal, lufs, timing], dim=0)
        return ConditionSet(
            e_task=multimodal[:m],
            e_lang=multimodal[m : 2 * m],
            e_audio=multimodal[2 * m : 3 * m],
            e_video=multimodal[3 * m :],
            e_lufs=lufs,
            e_timing=timing,
            presence=task,
            assembled=assembled,
        )

    def build(
        self,
        lang: ModalEmbedding | None,
        audio: ModalEmbedding | None,
        video: ModalEmbedding | None,
        lufs_left: NormalizedSeries,
        lufs_right: NormalizedSeries,
        timing: TimingPair,
    ) -> ConditionSet:
        multimodal, task = self.build_multimodal(lang, audio, video)
        return self.assemble(
            multimodal, self.build_lufs(lufs_left, lufs_right), self.build_timing(timing), task
        )

    def null_condition(self) -> ConditionSet:
        """Canonical unconditional context: all-zero matrix, task id 0."""
        m, d = self.m_tokens, self.cond_dim
        zero = torch.zeros(8 * m, d, dtype=self.task_table.dtype)
        return ConditionSet(
            e_task=zero[:m],
            e_lang=zero[m : 2 * m],
            e_audio=zero[2 * m : 3 * m],
            e_video=zero[3 * m : 4 * m],
            e_lufs=zero[4 * m : 6 * m],
            e_timing=zero[6 * m :],
            presence=build_task_id(False, False, False),
            assembled=zero,
        )


def null_condition_like(cond: ConditionSet) -> ConditionSet:
    """Canonical null with the same (M, d) as an existing condition."""
    rows, d = cond.assembled.shape
    m = rows // 8
    zero = torch.zeros(8 * m, d, dtype=cond.assembled.dtype)
    return ConditionSet(
        e_task=zero[:m],
        e_lang=zero[m : 2 * m],
        e_audio=zero[2 * m : 3 * m],
        e_video=zero[3 * m : 4 * m],
        e_lufs=zero[4 * m : 6 * m],
        e_timing=zero[6 * m :],
        presence=build_task_id(False, False, False),
        assembled=zero,
    )


def drop_all_for_cfg(
    cond: ConditionSet, rng: np.random.Generator, p: float = 0.1
) -> ConditionSet:
    """With probability p, replace the whole condition by the canonical null."""
    if rng.random() < p:
        return null_condition_like(cond)
    return cond
