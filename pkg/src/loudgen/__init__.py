"""Loudness-conditioned stereo audio generation toolkit.

Core pieces: BS.1770 LUFS metering with a dense 1/6-second momentary
series, multi-modal condition assembly (prompts + loudness + timing),
an exact frame-stacking latent codec, continuous-time v-objective
diffusion with classifier-free guidance, a small DiT denoiser, a visual
LUFS regressor, and evaluation metrics (Frechet distance, KL label
divergence, energy-peak AV alignment).
"""

from .audio import AudioBuffer, SignalSpec, WriteReport, read_wav, synth_signal, write_wav
from .codec import ConvCodec, FrameStackCodec, Latent
from .conditioning import (
    ConditionBuilder,
    ConditionSet,
    ModalEmbedding,
    SyntheticEncoder,
    TaskId,
    TimingPair,
    build_task_id,
    encode_prompt,
)
from .denoiser import DenoiserConfig, DiTDenoiser
from .diffusion import SamplerConfig, cfg_predict, forward_sample, sample, schedule_at, v_target
from .kweight import FilterCascade, design_k_weighting, k_weight
from .meter import (
    LufsSeries,
    NormalizedSeries,
    clip_normalize,
    integrated_lufs,
    momentary_lufs,
)
from .metrics import PeakList, av_align, energy_peaks, frechet_distance, kl_label_divergence
from .predictor import FrameFeatureSeq, LufsRegressor, RegressorConfig, extract_features
from .predictor import predict as predict_lufs
from .predictor import train_regressor

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "ConditionBuilder",
    "ConditionSet",
    "ConvCodec",
    "DenoiserConfig",
    "DiTDenoiser",
    "FilterCascade",
    "FrameFeatureSeq",
    "FrameStackCodec",
    "Latent",
    "LufsRegressor",
    "LufsSeries",
    "ModalEmbedding",
    "NormalizedSeries",
    "PeakList",
    "RegressorConfig",
    "SamplerConfig",
    "SignalSpec",
    "SyntheticEncoder",
    "TaskId",
    "TimingPair",
    "WriteReport",
    "av_align",
    "build_task_id",
    "cfg_predict",
    "clip_normalize",
    "design_k_weighting",
    "encode_prompt",
    "energy_peaks",
    "extract_features",
    "forward_sample",
    "frechet_distance",
    "integrated_lufs",
    "k_weight",
    "kl_label_divergence",
    "momentary_lufs",
    "predict_lufs",
    "read_wav",
    "sample",
    "schedule_at",
    "synth_signal",
    "train_regressor",
    "v_target",
    "write_wav",
]
