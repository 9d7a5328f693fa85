"""Command-line interface.

Subcommands: lufs measure|embed, condition build, train-toy, generate,
predict-lufs, ablate, metrics fd|kl|avalign. All numeric output is a pure
function of (config, seed); progress chatter goes to stderr so stdout and
output files stay byte-reproducible. LOUDGEN_LOG=quiet silences progress.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
import torch

from . import containers, diffusion, metrics, predictor, toytask
from .audio import read_wav, write_wav
from .conditioning import ConditionBuilder, build_task_id
from .config import apply_overrides, load_config, split_seed
from .errors import LoudgenError
from .meter import NormalizedSeries, clip_normalize, integrated_lufs, momentary_lufs


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _series_csv(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def cmd_lufs(args) -> int:
    buf = read_wav(args.wav)
    series = momentary_lufs(buf, window_seconds=args.window, hop_seconds=args.hop)
    if args.mode == "embed" or args.clip:
        shown = [clip_normalize(s).values if args.mode == "embed"
                 else np.clip(s.values, -70.0, 0.0) for s in series]
    else:
        shown = [s.values for s in series]
    times = series[0].times
    names = [s.channel for s in series]
    print("time_s," + ",".join(names))
    for i, t in enumerate(times):
        print(_fmt(t) + "," + ",".join(_fmt(col[i]) for col in shown))
    if args.mode == "measure" and args.integrated:
        print(f"integrated_lufs,{_fmt(integrated_lufs(buf))}")
    if args.csv:
        headers = ["time_s"] + [
            (f"norm_{n}" if args.mode == "embed" else f"lufs_{n}") for n in names
        ]
        _series_csv(args.csv, headers, [times] + shown)
    return 0


def _load_series_csv(path: str) -> tuple[NormalizedSeries, NormalizedSeries]:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[1] < 3:
        raise LoudgenError(f"{path}: expected columns time,left,right")
    return (
        NormalizedSeries(channel="left", values=rows[:, 1]),
        NormalizedSeries(channel="right", values=rows[:, 2]),
    )


def _normalized_from_wav(path: str) -> tuple[NormalizedSeries, NormalizedSeries]:
    series = momentary_lufs(read_wav(path))
    if len(series) == 1:
        left = clip_normalize(series[0])
        return (
            NormalizedSeries("left", left.values),
            NormalizedSeries("right", left.values.copy()),
        )
    return clip_normalize(series[0]), clip_normalize(series[1])


def cmd_condition(args) -> int:
    if args.lufs_csv:
        series = _load_series_csv(args.lufs_csv)
    elif args.lufs_wav:
        series = _normalized_from_wav(args.lufs_wav)
    else:
        raise LoudgenError("condition build requires --lufs-csv or --lufs-wav")
    duration = args.total if args.total else series[0].values.size / toytask.LUFS_CADENCE
    builder = ConditionBuilder(args.m_tokens, args.cond_dim, seed=args.seed)
    with torch.no_grad():
        cond = toytask.build_condition(
            builder, series, duration,
            lang_payload=args.text,
            audio_payload=args.audio_prompt,
            video_payload=args.video,
        )
    record = containers.ConditionRecord(
        m_tokens=args.m_tokens,
        cond_dim=args.cond_dim,
        task_id=cond.presence.id,
        presence=cond.presence.presence,
        assembled=cond.assembled.numpy(),
    )
    containers.write_condition(args.out, record)
    print(f"task_id,{cond.presence.id}")
    print(f"rows,{cond.assembled.shape[0]}")
    print(f"cols,{cond.assembled.shape[1]}")
    return 0


def cmd_train_toy(args) -> int:
    cfg = apply_overrides(load_config(args.config), args.set or [])
    if args.seed is not None:
        cfg["seed"] = args.seed
    result = toytask.train_toy(cfg, args.out)
    print(f"checkpoint,{result['checkpoint']}")
    print(f"final_loss,{result['losses'][-1]!r}")
    print(f"reference_lufs,{result['reference_lufs']!r}")
    return 0


def cmd_generate(args) -> int:
    if args.seconds > 60.0:
        raise LoudgenError("maximum duration is 60 seconds")
    model, builder, cfg, _ = toytask.load_toy_checkpoint(args.checkpoint)
    if args.lufs_csv:
        series = _load_series_csv(args.lufs_csv)
    else:
        lo, hi = (float(x) for x in args.ramp.split(":"))
        series = toytask.curve_series(
            toytask.ramp_curve(args.seconds, lo, hi), args.seconds
        )
    with torch.no_grad():
        cond = toytask.build_condition(
            builder, series, args.seconds,
            lang_payload=args.text,
            audio_payload=args.audio_prompt,
            video_payload=args.video,
        )
    sampler = diffusion.SamplerConfig(
        steps=args.steps, guidance_scale=args.guidance, seed=args.seed
    )
    buf = toytask.generate_audio(model, cond, cfg, args.seconds, sampler)
    report = write_wav(args.out, buf, encoding=args.encoding)
    measured_l, measured_r = toytask.measured_series(buf)
    print(f"frames,{buf.frames}")
    print(f"clipped_samples,{report.clipped_samples}")
    print("window,conditioned_left,measured_left,conditioned_right,measured_right")
    n = min(series[0].values.size, measured_l.size)
    for i in range(n):
        print(
            f"{i},{_fmt(series[0].values[i])},{_fmt(measured_l[i])},"
            f"{_fmt(series[1].values[i])},{_fmt(measured_r[i])}"
        )
    pooled_cond = np.concatenate([series[0].values[:n], series[1].values[:n]])
    pooled_meas = np.concatenate([measured_l[:n], measured_r[:n]])
    if np.std(pooled_cond) > 0 and np.std(pooled_meas) > 0:
        print(f"pearson_r,{_fmt(toytask.pearson(pooled_cond, pooled_meas))}")
    return 0


def cmd_predict_lufs(args) -> int:
    if args.train:
        cfg = apply_overrides(load_config(args.config), args.set or [])
        model = toytask.quick_regressor(
            cfg, split_seed(cfg["seed"], "regressor"), epochs=args.epochs
        )
        tensors = {f"regressor.{k}": v.numpy() for k, v in model.state_dict().items()}
        meta = {"kind": "lufs-regressor", "feature_dim": model.config.feature_dim,
                "embed_dim": model.config.embed_dim, "ffn_dim": model.config.ffn_dim,
                "layers": model.config.layers, "heads": model.config.heads}
        containers.save_checkpoint(args.checkpoint, tensors, meta)
        print(f"checkpoint,{args.checkpoint}")
        return 0

    tensors, meta = containers.load_checkpoint(args.checkpoint)
    if meta.get("kind") != "lufs-regressor":
        raise LoudgenError(f"{args.checkpoint} is not a regressor checkpoint")
    config = predictor.RegressorConfig(
        feature_dim=meta["feature_dim"], embed_dim=meta["embed_dim"],
        ffn_dim=meta["ffn_dim"], layers=meta["layers"], heads=meta["heads"],
    )
    model = predictor.LufsRegressor(config)
    model.load_state_dict(
        {k[len("regressor."):]: torch.as_tensor(v) for k, v in tensors.items()}
    )
    model.eval()

    if args.features:
        feats = predictor.FrameFeatureSeq(
            fps=args.fps, features=containers.read_features(args.features),
            source="external",
        )
    elif args.brightness_csv:
        rows = np.loadtxt(args.brightness_csv, delimiter=",", skiprows=1, ndmin=2)
        source = predictor.SyntheticFrameSource(
            times=rows[:, 0], brightness=rows[:, 1], duration=float(rows[-1, 0]),
        )
        feats = predictor.extract_features(source, fps=args.fps)
    else:
        raise LoudgenError("predict-lufs requires --features or --brightness-csv")
    left, right = predictor.predict(model, feats)
    times = np.arange(left.values.size) / feats.fps
    print("time_s,norm_left,norm_right")
    for t, l, r in zip(times, left.values, right.values):
        print(f"{_fmt(t)},{_fmt(l)},{_fmt(r)}")
    if args.out:
        _series_csv(args.out, ["time_s", "norm_left", "norm_right"],
                    [times, left.values, right.values])
    return 0


def cmd_ablate(args) -> int:
    model, builder, cfg, _ = toytask.load_toy_checkpoint(args.checkpoint)
    rows = toytask.ablate(
        model, builder, cfg,
        n_clips=args.clips, steps=args.steps, guidance=args.guidance, seed=args.seed,
    )
    lines = ["language\taudio\tvideo\tlufs_source\tfd\tkl\tav_align"]
    for row in rows:
        lines.append(
            f"{int(row['lang'])}\t{int(row['audio'])}\t1\t{row['lufs_source']}\t"
            f"{row['fd']:.6f}\t{row['kl']:.6f}\t{row['av_align']:.6f}"
        )
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table)
    return 0


def cmd_metrics(args) -> int:
    if args.metric == "fd":
        value = metrics.frechet_distance(
            containers.read_features(args.a), containers.read_features(args.b)
        )
        print(f"frechet_distance,{_fmt(value)}")
    elif args.metric == "kl":
        value = metrics.kl_label_divergence(
            containers.read_features(args.a), containers.read_features(args.b)
        )
        print(f"kl_divergence,{_fmt(value)}")
    else:
        peaks = []
        for path in (args.a, args.b):
            if path.endswith(".wav"):
                peaks.append(metrics.energy_peaks(
                    read_wav(path), window=args.window, threshold=args.threshold
                ))
            else:
                times = np.loadtxt(path, ndmin=1)
                peaks.append(metrics.PeakList(times=times))
        value = metrics.av_align(peaks[0], peaks[1], tolerance=args.tolerance)
        print(f"av_align,{_fmt(value)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loudgen",
        description="Loudness-conditioned audio generation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lufs", help="momentary/integrated loudness of a WAV file")
    p.add_argument("mode", choices=["measure", "embed"])
    p.add_argument("wav")
    p.add_argument("--window", type=float, default=1.0 / 6.0)
    p.add_argument("--hop", type=float, default=1.0 / 6.0)
    p.add_argument("--integrated", action="store_true")
    p.add_argument("--clip", action="store_true",
                   help="clip measure output to [-70, 0] LUFS")
    p.add_argument("--csv", help="also write the series to this CSV file")
    p.set_defaults(func=cmd_lufs)

    p = sub.add_parser("condition", help="build and serialize a condition set")
    p.add_argument("mode", choices=["build"])
    p.add_argument("--lufs-csv", help="normalized series CSV (time,left,right)")
    p.add_argument("--lufs-wav", help="WAV to meter and normalize for E_L")
    p.add_argument("--text", help="language prompt payload")
    p.add_argument("--audio-prompt", help="audio prompt payload")
    p.add_argument("--video", help="video prompt payload")
    p.add_argument("--total", type=float, help="x_total seconds (default: series span)")
    p.add_argument("--m-tokens", type=int, default=12)
    p.add_argument("--cond-dim", type=int, default=48)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_condition)

    p = sub.add_parser("train-toy", help="train the toy loudness-conditioned denoiser")
    p.add_argument("--config", help="YAML run config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("generate", help="sample audio from a toy checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("--lufs-csv", help="conditioning series CSV (time,left,right)")
    p.add_argument("--ramp", default="0.4:0.9", help="lo:hi normalized loudness ramp")
    p.add_argument("--text")
    p.add_argument("--audio-prompt")
    p.add_argument("--video", default="clip")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--guidance", type=float, default=7.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--encoding", choices=["pcm16", "float32"], default="float32")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("predict-lufs", help="predict normalized LUFS from frame features")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train", action="store_true",
                   help="train the synthetic-task regressor and save it")
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--config", help="YAML run config (for --train)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--features", help="feature container (T x d_f)")
    p.add_argument("--brightness-csv", help="CSV (time,brightness) for the synthetic backbone")
    p.add_argument("--fps", type=float, default=6.0)
    p.add_argument("--out", help="write predictions to CSV")
    p.set_defaults(func=cmd_predict_lufs)

    p = sub.add_parser("ablate", help="metric grid over condition combinations")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clips", type=int, default=6)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--guidance", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=777)
    p.add_argument("--out", help="write the TSV table here as well")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("metrics", help="evaluation metrics over saved files")
    p.add_argument("metric", choices=["fd", "kl", "avalign"])
    p.add_argument("a", help="feature/label container, peak list, or WAV")
    p.add_argument("b", help="feature/label container, peak list, or WAV")
    p.add_argument("--tolerance", type=float, default=0.1)
    p.add_argument("--window", type=float, default=0.25)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv: list[str] | None = None) -> int:
    torch.manual_seed(0)
    torch.set_num_threads(1)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LoudgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
