"""Binary container formats for conditions, latents, feature sets, and checkpoints.

All containers are little-endian with a 4-byte magic and a u16 version,
followed by a fixed header and row-major float32 payload. Checkpoints use
a JSON header so arbitrary named tensors and run metadata travel together.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContainerError

_CONDITION_MAGIC = b"LGCD"
_LATENT_MAGIC = b"LGLT"
_FEATURE_MAGIC = b"LGFT"
_CHECKPOINT_MAGIC = b"LGCK"
_VERSION = 1


@dataclass
class ConditionRecord:
    """Serialized condition: assembled 8M x d matrix plus task metadata."""

    m_tokens: int
    cond_dim: int
    task_id: int
    presence: tuple[bool, bool, bool]
    assembled: np.ndarray


def _open_payload(path: str, magic: bytes):
    fh = open(path, "rb")
    head = fh.read(6)
    if len(head) < 6 or head[:4] != magic:
        fh.close()
        raise ContainerError(f"{path}: bad magic, expected {magic!r}")
    version = struct.unpack("<H", head[4:6])[0]
    if version != _VERSION:
        fh.close()
        raise ContainerError(f"{path}: unsupported container version {version}")
    return fh


def _read_f32_matrix(fh, rows: int, cols: int, path: str) -> np.ndarray:
    raw = fh.read(4 * rows * cols)
    if len(raw) != 4 * rows * cols:
        raise ContainerError(f"{path}: truncated float32 payload")
    return np.frombuffer(raw, dtype="<f4").reshape(rows, cols).astype(np.float64)


def write_condition(path: str, record: ConditionRecord) -> None:
    assembled = np.asarray(record.assembled, dtype=np.float64)
    if assembled.shape != (8 * record.m_tokens, record.cond_dim):
        raise ContainerError(
            f"assembled shape {assembled.shape} does not match 8M x d "
            f"for M={record.m_tokens}, d={record.cond_dim}"
        )
    presence_bits = (
        (4 if record.presence[0] else 0)
        | (2 if record.presence[1] else 0)
        | (1 if record.presence[2] else 0)
    )
    with open(path, "wb") as fh:
        fh.write(_CONDITION_MAGIC)
        fh.write(struct.pack("<HIIBB", _VERSION, record.m_tokens, record.cond_dim,
                             record.task_id, presence_bits))
        fh.write(assembled.astype("<f4").tobytes())


def read_condition(path: str) -> ConditionRecord:
    with _open_payload(path, _CONDITION_MAGIC) as fh:
        raw = fh.read(10)
        if len(raw) != 10:
            raise ContainerError(f"{path}: truncated condition header")
        m_tokens, cond_dim, task_id, presence_bits = struct.unpack("<IIBB", raw)
        assembled = _read_f32_matrix(fh, 8 * m_tokens, cond_dim, path)
    return ConditionRecord(
        m_tokens=m_tokens,
        cond_dim=cond_dim,
        task_id=task_id,
        presence=(bool(presence_bits & 4), bool(presence_bits & 2), bool(presence_bits & 1)),
        assembled=assembled,
    )


def write_latent(
    path: str,
    data: np.ndarray,
    downsample_factor: int,
    source_rate: int,
    unpadded_length: int,
) -> None:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ContainerError(f"latent data must be 2-D, got shape {data.shape}")
    with open(path, "wb") as fh:
        fh.write(_LATENT_MAGIC)
        fh.write(struct.pack("<HIIIIQ", _VERSION, data.shape[0], data.shape[1],
                             downsample_factor, source_rate, unpadded_length))
        fh.write(data.astype("<f4").tobytes())


def read_latent(path: str) -> dict:
    with _open_payload(path, _LATENT_MAGIC) as fh:
        raw = fh.read(24)
        if len(raw) != 24:
            raise ContainerError(f"{path}: truncated latent header")
        channels, frames, factor, rate, unpadded = struct.unpack("<IIIIQ", raw)
        data = _read_f32_matrix(fh, channels, frames, path)
    return {
        "data": data,
        "downsample_factor": factor,
        "source_rate": rate,
        "unpadded_length": unpadded,
    }


def write_features(path: str, vectors: np.ndarray) -> None:
    """Feature or label set: N x d row-major float32."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ContainerError(f"feature set must be 2-D, got shape {vectors.shape}")
    with open(path, "wb") as fh:
        fh.write(_FEATURE_MAGIC)
        fh.write(struct.pack("<HII", _VERSION, vectors.shape[0], vectors.shape[1]))
        fh.write(vectors.astype("<f4").tobytes())


def read_features(path: str) -> np.ndarray:
    with _open_payload(path, _FEATURE_MAGIC) as fh:
        raw = fh.read(8)
        if len(raw) != 8:
            raise ContainerError(f"{path}: truncated feature header")
        n, d = struct.unpack("<II", raw)
        return _read_f32_matrix(fh, n, d, path)


def save_checkpoint(path: str, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Versioned checkpoint: JSON header (meta + tensor index) + float32 data."""
    index = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype="<f4", order="C")
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += len(blobs[-1])
    header = json.dumps({"meta": meta, "tensors": index}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HQ", _VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with _open_payload(path, _CHECKPOINT_MAGIC) as fh:
        raw = fh.read(8)
        if len(raw) != 8:
            raise ContainerError(f"{path}: truncated checkpoint header")
        header_len = struct.unpack("<Q", raw)[0]
        try:
            header = json.loads(fh.read(header_len))
        except ValueError as exc:
            raise ContainerError(f"{path}: bad checkpoint header: {exc}") from exc
        payload = fh.read()
    tensors = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        chunk = payload[start : start + 4 * count]
        if len(chunk) != 4 * count:
            raise ContainerError(f"{path}: truncated tensor {entry['name']!r}")
        tensors[entry["name"]] = (
            np.frombuffer(chunk, dtype="<f4").reshape(entry["shape"]).copy()
        )
    return tensors, header["meta"]
