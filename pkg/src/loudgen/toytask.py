"""End-to-end toy experiment: loudness-conditioned noise generation.

The synthetic task makes conditioning fidelity measurable in a closed
loop: every clip is one fixed band-limited stereo noise carrier whose
amplitude envelope realizes a target normalized LUFS curve, the curve
itself is the loudness condition, and the toolkit's own meter judges
generated audio against the curve it was conditioned on.

Sharing a single seeded carrier across the dataset makes the clip a
deterministic function of its curve, so the loudness condition drives the
conditional mean of the latents rather than only their variance — the
denoising loss then cannot be minimized without using the condition.
"""

from __future__ import annotations

import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np
import torch

from . import containers, diffusion, metrics
from .audio import AudioBuffer, SignalSpec, synth_signal
from .codec import FrameStackCodec, Latent
from .conditioning import (
    ConditionBuilder,
    ConditionSet,
    ModalEmbedding,
    SyntheticEncoder,
    TimingPair,
    encode_prompt,
)
from .config import split_seed
from .denoiser import DenoiserConfig, DiTDenoiser, train_step
from .errors import ConfigError
from .meter import MOMENTARY_WINDOW_S, NormalizedSeries, clip_normalize, momentary_lufs
from .predictor import (
    BrightnessBackbone,
    FrameFeatureSeq,
    LufsRegressor,
    RegressorConfig,
    predict,
    train_regressor,
)

LUFS_CADENCE = 1.0 / MOMENTARY_WINDOW_S  # 6 condition points per second


def _log(message: str) -> None:
    if os.environ.get("LOUDGEN_LOG") != "quiet":
        print(message, file=sys.stderr, flush=True)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.corrcoef(np.asarray(x), np.asarray(y))[0, 1])


def make_carrier(cfg: dict) -> AudioBuffer:
    """The fixed band-limited noise carrier every dataset clip modulates.

    Seeded from the experiment seed so training, ablation references, and
    calibration all share one realization.
    """
    data = cfg["data"]
    spec = SignalSpec(
        kind="white_noise",
        duration=data["clip_seconds"],
        amplitude=1.0,
        frequency=data["band_hz"],
    )
    return synth_signal(
        spec, data["sample_rate"], channels=2, seed=split_seed(cfg["seed"], "carrier")
    )


def reference_lufs(carrier: AudioBuffer) -> float:
    """Mean momentary LUFS of the unit-gain carrier.

    Target curves are realized relative to this constant: a window whose
    envelope gain is g sits at reference + 20*log10(g) LUFS.
    """
    series = momentary_lufs(carrier)
    return float(np.mean([np.mean(s.values) for s in series]))


def curve_to_gains(values: np.ndarray, ref_lufs: float) -> np.ndarray:
    """Map normalized loudness targets onto linear envelope gains."""
    lufs = 70.0 * np.asarray(values, dtype=np.float64) - 70.0
    return 10.0 ** ((lufs - ref_lufs) / 20.0)


def random_curve(
    rng: np.random.Generator, duration: float, lo: float, hi: float
) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear normalized loudness curve with 3-6 interior knots."""
    knots = int(rng.integers(3, 7))
    times = np.sort(rng.uniform(0.0, duration, knots))
    times = np.concatenate([[0.0], times, [duration]])
    values = rng.uniform(lo, hi, times.size)
    return times, values


def ramp_curve(duration: float, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    return np.array([0.0, duration]), np.array([lo, hi])


def curve_series(
    curve: tuple[np.ndarray, np.ndarray], duration: float
) -> tuple[NormalizedSeries, NormalizedSeries]:
    """Sample a curve at the meter cadence (window centers, 6 per second)."""
    n = int(np.floor(duration * LUFS_CADENCE))
    centers = (np.arange(n) + 0.5) / LUFS_CADENCE
    values = np.interp(centers, curve[0], curve[1])
    return (
        NormalizedSeries(channel="left", values=values),
        NormalizedSeries(channel="right", values=values.copy()),
    )


def synth_curve_clip(
    curve: tuple[np.ndarray, np.ndarray],
    carrier: AudioBuffer,
    ref_lufs: float,
) -> AudioBuffer:
    """The carrier modulated so its envelope realizes the loudness curve.

    The curve is interpolated per sample in normalized-loudness space
    (linear in dB) before conversion to linear gain, so window centers
    measure at their target values.
    """
    times = np.arange(carrier.frames) / carrier.sample_rate
    gains = curve_to_gains(np.interp(times, curve[0], curve[1]), ref_lufs)
    return AudioBuffer(samples=carrier.samples * gains, sample_rate=carrier.sample_rate)


@dataclass
class ToyExample:
    z0: torch.Tensor
    curve: tuple[np.ndarray, np.ndarray]
    lufs_left: NormalizedSeries
    lufs_right: NormalizedSeries
    lang: ModalEmbedding
    audio: ModalEmbedding
    video: ModalEmbedding
    timing: TimingPair


def _encoders(m_tokens: int, cond_dim: int) -> dict[str, SyntheticEncoder]:
    return {
        name: SyntheticEncoder(name, m_tokens, cond_dim)
        for name in ("language", "audio", "video")
    }


def make_dataset(
    cfg: dict, carrier: AudioBuffer, ref: float, seed: int
) -> list[ToyExample]:
    data = cfg["data"]
    rng = np.random.default_rng(seed)
    codec = FrameStackCodec(data["downsample_factor"])
    encoders = _encoders(data["m_tokens"], data["cond_dim"])
    duration = data["clip_seconds"]
    examples = []
    for i in range(data["dataset_size"]):
        curve = random_curve(rng, duration, data["curve_min"], data["curve_max"])
        buf = synth_curve_clip(curve, carrier, ref)
        left, right = curve_series(curve, duration)
        latent = codec.encode(buf)
        examples.append(
            ToyExample(
                z0=torch.as_tensor(
                    latent.data * data["latent_scale"], dtype=torch.float32
                ),
                curve=curve,
                lufs_left=left,
                lufs_right=right,
                lang=encode_prompt(encoders["language"], f"scene {i}"),
                audio=encode_prompt(encoders["audio"], f"texture {i}"),
                video=encode_prompt(encoders["video"], f"clip {i}"),
                timing=TimingPair(x_start=0.0, x_total=duration),
            )
        )
    return examples


def denoiser_config(cfg: dict) -> DenoiserConfig:
    data, model = cfg["data"], cfg["model"]
    r = data["downsample_factor"]
    frames = -(-int(round(data["clip_seconds"] * data["sample_rate"])) // r)
    return DenoiserConfig(
        latent_channels=2 * r,
        max_frames=frames,
        cond_rows=8 * data["m_tokens"],
        cond_dim=data["cond_dim"],
        blocks=model["blocks"],
        heads=model["heads"],
        embed_dim=model["embed_dim"],
        mlp_ratio=model["mlp_ratio"],
        time_features=model["time_features"],
    )


def _warmup_cosine(warmup_steps: int, total_steps: int):
    """LR factor: linear warmup, then cosine decay to 10% of the peak."""
    warmup = max(1, warmup_steps)

    def factor(step: int) -> float:
        if step < warmup:
            return (step + 1) / warmup
        progress = (step - warmup) / max(1, total_steps - warmup)
        return 0.1 + 0.45 * (1.0 + math.cos(math.pi * min(progress, 1.0)))

    return factor


def train_toy(cfg: dict, out_dir: str) -> dict:
    """Train the toy denoiser; writes checkpoint, loss curve, and config."""
    os.makedirs(out_dir, exist_ok=True)
    root = cfg["seed"]
    data, training = cfg["data"], cfg["training"]
    if cfg["diffusion"]["objective"] not in ("v", "epsilon"):
        raise ConfigError("diffusion.objective must be 'v' or 'epsilon'")

    carrier = make_carrier(cfg)
    ref = reference_lufs(carrier)
    examples = make_dataset(cfg, carrier, ref, split_seed(root, "dataset"))
    builder = ConditionBuilder(data["m_tokens"], data["cond_dim"], split_seed(root, "builder"))
    model = DiTDenoiser.init(denoiser_config(cfg), split_seed(root, "model"))

    optimizer = torch.optim.Adam(
        list(model.parameters()) + list(builder.parameters()), lr=training["lr"]
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, _warmup_cosine(training["warmup_steps"], training["steps"])
    )
    rng = np.random.default_rng(split_seed(root, "training"))
    batch_size = training["batch_size"]
    losses = []
    started = time.perf_counter()
    for step in range(training["steps"]):
        idx = rng.integers(0, len(examples), batch_size)
        batch = [
            diffusion.ConditionedLatent(
                z0=examples[i].z0,
                lang=examples[i].lang,
                audio=examples[i].audio,
                video=examples[i].video,
                lufs_left=examples[i].lufs_left,
                lufs_right=examples[i].lufs_right,
                timing=examples[i].timing,
            )
            for i in idx
        ]
        losses.append(
            train_step(model, builder, optimizer, batch, rng, cfg["diffusion"]["objective"])
        )
        scheduler.step()
        if (step + 1) % training["log_every"] == 0:
            recent = float(np.mean(losses[-training["log_every"]:]))
            _log(f"step {step + 1}/{training['steps']} loss {recent:.5f}")

    elapsed = time.perf_counter() - started
    _log(f"training finished in {elapsed:.1f} s")

    tensors = {f"denoiser.{k}": v.numpy() for k, v in model.state_dict().items()}
    tensors.update({f"builder.{k}": v.numpy() for k, v in builder.state_dict().items()})
    meta = {
        "kind": "toy-diffusion",
        "config": cfg,
        "reference_lufs": ref,
        "final_loss": losses[-1],
    }
    ckpt_path = os.path.join(out_dir, "checkpoint.lgck")
    containers.save_checkpoint(ckpt_path, tensors, meta)
    with open(os.path.join(out_dir, "loss_curve.csv"), "w") as fh:
        fh.write("step,loss\n")
        for i, value in enumerate(losses):
            fh.write(f"{i + 1},{value!r}\n")
    from .config import dump_config

    with open(os.path.join(out_dir, "config.yaml"), "w") as fh:
        fh.write(dump_config(cfg))
    return {
        "checkpoint": ckpt_path,
        "losses": losses,
        "reference_lufs": ref,
        "seconds": elapsed,
    }


def load_toy_checkpoint(path: str) -> tuple[DiTDenoiser, ConditionBuilder, dict, float]:
    tensors, meta = containers.load_checkpoint(path)
    if meta.get("kind") != "toy-diffusion":
        raise ConfigError(f"{path} is not a toy-diffusion checkpoint")
    cfg = meta["config"]
    model = DiTDenoiser(denoiser_config(cfg))
    builder = ConditionBuilder(cfg["data"]["m_tokens"], cfg["data"]["cond_dim"])
    model.load_state_dict(
        {k[len("denoiser."):]: torch.as_tensor(v) for k, v in tensors.items()
         if k.startswith("denoiser.")}
    )
    builder.load_state_dict(
        {k[len("builder."):]: torch.as_tensor(v) for k, v in tensors.items()
         if k.startswith("builder.")}
    )
    model.eval()
    return model, builder, cfg, float(meta["reference_lufs"])


def build_condition(
    builder: ConditionBuilder,
    series: tuple[NormalizedSeries, NormalizedSeries],
    duration: float,
    lang_payload: str | None = None,
    audio_payload: str | None = None,
    video_payload: str | None = "clip",
) -> ConditionSet:
    """Inference-style condition: x_start fixed at 0, x_total = duration."""
    encoders = _encoders(builder.m_tokens, builder.cond_dim)
    lang = encode_prompt(encoders["language"], lang_payload) if lang_payload else None
    audio = encode_prompt(encoders["audio"], audio_payload) if audio_payload else None
    video = encode_prompt(encoders["video"], video_payload) if video_payload else None
    timing = TimingPair(x_start=0.0, x_total=duration)
    return builder.build(lang, audio, video, series[0], series[1], timing)


def generate_audio(
    model: DiTDenoiser,
    cond: ConditionSet,
    cfg: dict,
    seconds: float,
    sampler: diffusion.SamplerConfig,
) -> AudioBuffer:
    """Sample a latent, decode, and trim to exactly round(seconds * rate)."""
    data = cfg["data"]
    r = data["downsample_factor"]
    n_samples = int(round(seconds * data["sample_rate"]))
    frames = -(-n_samples // r)
    z = diffusion.sample(model, cond, (2 * r, frames), sampler)
    latent = Latent(
        data=z.numpy().astype(np.float64) / data["latent_scale"],
        downsample_factor=r,
        source_rate=data["sample_rate"],
        unpadded_length=n_samples,
    )
    return FrameStackCodec(r).decode(latent)


def measured_series(buf: AudioBuffer) -> tuple[np.ndarray, np.ndarray]:
    left, right = momentary_lufs(buf)
    return clip_normalize(left).values, clip_normalize(right).values


def evaluate_fidelity(
    model: DiTDenoiser,
    builder: ConditionBuilder,
    cfg: dict,
    n_generations: int = 20,
    steps: int = 50,
    guidance: float = 2.0,
    seed: int = 1234,
) -> dict:
    """Ramp-conditioned generations scored by the toolkit's own meter.

    Returns the pooled Pearson correlation between conditioned and
    measured normalized momentary LUFS across windows, channels, and
    generations.
    """
    data = cfg["data"]
    duration = data["clip_seconds"]
    curve = ramp_curve(duration, data["curve_min"], data["curve_max"])
    series = curve_series(curve, duration)
    cond = builder.build(
        None, None,
        encode_prompt(_encoders(builder.m_tokens, builder.cond_dim)["video"], "ramp clip"),
        series[0], series[1], TimingPair(0.0, duration),
    )
    conditioned = []
    measured = []
    for g in range(n_generations):
        sampler = diffusion.SamplerConfig(
            steps=steps, guidance_scale=guidance, seed=split_seed(seed, f"gen{g}")
        )
        buf = generate_audio(model, cond, cfg, duration, sampler)
        left, right = measured_series(buf)
        for ch_measured, ch_series in ((left, series[0]), (right, series[1])):
            n = min(ch_measured.size, ch_series.values.size)
            conditioned.append(ch_series.values[:n])
            measured.append(ch_measured[:n])
    conditioned = np.concatenate(conditioned)
    measured = np.concatenate(measured)
    return {
        "pearson_r": pearson(conditioned, measured),
        "conditioned": conditioned,
        "measured": measured,
        "n_generations": n_generations,
    }


def band_energy_features(buffers: list[AudioBuffer], n_bands: int = 8) -> np.ndarray:
    """Log band-energy vector per clip over geometrically spaced bands."""
    rows = []
    for buf in buffers:
        mono = buf.samples.mean(axis=0)
        power = np.abs(np.fft.rfft(mono)) ** 2
        freqs = np.fft.rfftfreq(mono.size, 1.0 / buf.sample_rate)
        edges = np.geomspace(20.0, buf.sample_rate / 2.0, n_bands + 1)
        rows.append(
            [np.log10(power[(freqs >= lo) & (freqs < hi)].sum() + 1e-12)
             for lo, hi in zip(edges[:-1], edges[1:])]
        )
    return np.asarray(rows, dtype=np.float64)


def band_labels(features: np.ndarray) -> np.ndarray:
    """Softmax the band energies into per-clip label probabilities."""
    z = features - features.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _predicted_series(
    regressor: LufsRegressor,
    curve: tuple[np.ndarray, np.ndarray],
    duration: float,
    backbone: BrightnessBackbone,
) -> tuple[NormalizedSeries, NormalizedSeries]:
    """Treat the loudness curve as the video brightness track and regress E_L."""
    n = int(np.floor(duration * LUFS_CADENCE))
    times = np.arange(n) / LUFS_CADENCE
    brightness = np.interp(times, curve[0], curve[1])
    feats = FrameFeatureSeq(fps=LUFS_CADENCE, features=backbone.featurize(brightness))
    return predict(regressor, feats)


def quick_regressor(cfg: dict, seed: int, epochs: int = 12) -> LufsRegressor:
    """Small brightness-to-loudness regressor used for ablation 'pred' rows."""
    data = cfg["data"]
    duration = data["clip_seconds"]
    n_frames = int(np.floor(duration * LUFS_CADENCE))
    backbone = BrightnessBackbone()
    rng = np.random.default_rng(seed)
    dataset = []
    for _ in range(96):
        curve = random_curve(rng, duration, data["curve_min"], data["curve_max"])
        times = np.arange(n_frames) / LUFS_CADENCE
        values = np.interp(times, curve[0], curve[1])
        feats = FrameFeatureSeq(fps=LUFS_CADENCE, features=backbone.featurize(values))
        target = NormalizedSeries("left", values), NormalizedSeries("right", values.copy())
        dataset.append((feats, target))
    model, _ = train_regressor(
        dataset, epochs=epochs, seed=seed, batch_size=16,
        config=RegressorConfig(feature_dim=backbone.feature_dim, embed_dim=64, ffn_dim=128),
    )
    return model


ABLATION_ROWS = [
    {"lang": lang, "audio": audio, "lufs_source": source}
    for source in ("predicted", "gt")
    for lang in (False, True)
    for audio in (False, True)
]


def ablate(
    model: DiTDenoiser,
    builder: ConditionBuilder,
    cfg: dict,
    regressor: LufsRegressor | None = None,
    n_clips: int = 6,
    steps: int = 30,
    guidance: float = 2.0,
    seed: int = 777,
) -> list[dict]:
    """Metric table over the 8 condition combinations (video always on).

    Rows vary language presence, audio-prompt presence, and whether the
    loudness condition comes from the regressor or the ground-truth curve.
    """
    data = cfg["data"]
    carrier = make_carrier(cfg)
    ref = reference_lufs(carrier)
    duration = data["clip_seconds"]
    if regressor is None:
        regressor = quick_regressor(cfg, split_seed(seed, "regressor"))
    backbone = BrightnessBackbone()

    rng = np.random.default_rng(split_seed(seed, "reference"))
    curves = [
        random_curve(rng, duration, data["curve_min"], data["curve_max"])
        for _ in range(n_clips)
    ]
    reference_bufs = [synth_curve_clip(curve, carrier, ref) for curve in curves]
    ref_features = band_energy_features(reference_bufs)

    rows = []
    for combo in ABLATION_ROWS:
        generated = []
        align_scores = []
        for k, curve in enumerate(curves):
            if combo["lufs_source"] == "gt":
                series = curve_series(curve, duration)
            else:
                series = _predicted_series(regressor, curve, duration, backbone)
            cond = build_condition(
                builder, series, duration,
                lang_payload=f"scene {k}" if combo["lang"] else None,
                audio_payload=f"texture {k}" if combo["audio"] else None,
                video_payload=f"clip {k}",
            )
            sampler = diffusion.SamplerConfig(
                steps=steps, guidance_scale=guidance,
                seed=split_seed(seed, f"{combo['lang']}-{combo['audio']}-"
                                      f"{combo['lufs_source']}-{k}"),
            )
            buf = generate_audio(model, cond, cfg, duration, sampler)
            generated.append(buf)
            audio_pk = metrics.energy_peaks(buf, window=0.25, threshold=0.6)
            video_pk = metrics.energy_peaks(
                np.interp((np.arange(int(duration * LUFS_CADENCE)) + 0.5) / LUFS_CADENCE,
                          curve[0], curve[1]),
                window=0.25, threshold=0.6, frame_rate=LUFS_CADENCE,
            )
            align_scores.append(metrics.av_align(audio_pk, video_pk, tolerance=0.25))

        gen_features = band_energy_features(generated)
        row = dict(combo)
        row["fd"] = metrics.frechet_distance(ref_features, gen_features)
        row["kl"] = metrics.kl_label_divergence(
            band_labels(ref_features), band_labels(gen_features)
        )
        row["av_align"] = float(np.mean(align_scores))
        rows.append(row)
        _log(
            f"ablate lang={combo['lang']} audio={combo['audio']} "
            f"lufs={combo['lufs_source']}: fd {row['fd']:.4f} kl {row['kl']:.4f} "
            f"av {row['av_align']:.3f}"
        )
    return rows
