"""Run configuration: YAML file + dotted CLI overrides + seed splitting.

A run is fully determined by the resolved config dictionary; every
subsystem derives its own seed from the root seed through split_seed so
that changing one consumer does not shift another's random stream.
"""

from __future__ import annotations

import copy
import hashlib

import yaml

from .errors import ConfigError

DEFAULTS: dict = {
    "seed": 0,
    "data": {
        "sample_rate": 8000,
        "clip_seconds": 1.0,
        "band_hz": 500.0,
        "downsample_factor": 64,
        "m_tokens": 12,
        "cond_dim": 48,
        "dataset_size": 48,
        "curve_min": 0.35,
        "curve_max": 0.95,
        "latent_scale": 6.0,
    },
    "model": {
        "blocks": 3,
        "heads": 4,
        "embed_dim": 128,
        "mlp_ratio": 2.0,
        "time_features": 16,
    },
    "diffusion": {
        "objective": "v",
        "steps": 100,
        "guidance": 7.0,
    },
    "training": {
        "lr": 2e-3,
        "batch_size": 8,
        "steps": 16000,
        "warmup_steps": 200,
        "log_every": 100,
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            _merge(base[key], value, where)
        else:
            base[key] = value
    return base


def load_config(path: str | None = None) -> dict:
    """Defaults merged with an optional YAML file; unknown keys rejected."""
    cfg = default_config()
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path!r}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ConfigError(f"config root in {path!r} must be a mapping")
    return _merge(cfg, loaded)


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply dotted key=value overrides, e.g. training.lr=1e-3."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        node = cfg
        for key in keys[:-1]:
            if not isinstance(node, dict) or key not in node:
                raise ConfigError(f"unknown config key {dotted!r}")
            node = node[key]
        leaf = keys[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        if isinstance(node[leaf], dict):
            raise ConfigError(f"{dotted!r} is a section, not a value")
        value = yaml.safe_load(raw)
        if isinstance(value, str):
            # YAML 1.1 leaves bare scientific notation like "1e-4" as a
            # string; numeric overrides should still land as numbers.
            try:
                value = float(value) if "." in value or "e" in value.lower() else int(value)
            except ValueError:
                pass
        node[leaf] = value
    return cfg


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True)


def split_seed(root_seed: int, label: str) -> int:
    """Derive a stable per-subsystem 63-bit seed from the root seed."""
    digest = hashlib.sha256(f"{root_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFFFFFFFFFFFFFF
