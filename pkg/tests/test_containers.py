import struct

import numpy as np
import pytest

from loudgen import containers
from loudgen.containers import ConditionRecord
from loudgen.errors import ContainerError


def test_condition_round_trip(tmp_path):
    path = str(tmp_path / "cond.lgcd")
    rng = np.random.default_rng(0)
    assembled = rng.standard_normal((32, 16)).astype(np.float32).astype(np.float64)
    record = ConditionRecord(
        m_tokens=4, cond_dim=16, task_id=5, presence=(True, False, True), assembled=assembled
    )
    containers.write_condition(path, record)
    back = containers.read_condition(path)
    assert back.m_tokens == 4
    assert back.cond_dim == 16
    assert back.task_id == 5
    assert back.presence == (True, False, True)
    np.testing.assert_array_equal(back.assembled, assembled)  # float32 data, bit-exact


def test_condition_shape_mismatch_rejected(tmp_path):
    record = ConditionRecord(
        m_tokens=4, cond_dim=16, task_id=0, presence=(False, False, False),
        assembled=np.zeros((31, 16)),
    )
    with pytest.raises(ContainerError):
        containers.write_condition(str(tmp_path / "bad.lgcd"), record)


def test_latent_round_trip(tmp_path):
    path = str(tmp_path / "z.lglt")
    data = np.random.default_rng(1).standard_normal((8, 5)).astype(np.float32)
    containers.write_latent(path, data, downsample_factor=4, source_rate=8000,
                            unpadded_length=18)
    back = containers.read_latent(path)
    np.testing.assert_array_equal(back["data"], data.astype(np.float64))
    assert back["downsample_factor"] == 4
    assert back["source_rate"] == 8000
    assert back["unpadded_length"] == 18


def test_features_round_trip(tmp_path):
    path = str(tmp_path / "x.lgft")
    vectors = np.linspace(-1, 1, 12).reshape(3, 4).astype(np.float32)
    containers.write_features(path, vectors)
    np.testing.assert_array_equal(containers.read_features(path), vectors.astype(np.float64))
    with pytest.raises(ContainerError):
        containers.write_features(str(tmp_path / "bad.lgft"), np.zeros(3))


def test_checkpoint_round_trip(tmp_path):
    path = str(tmp_path / "model.lgck")
    tensors = {
        "weight": np.arange(6, dtype=np.float32).reshape(2, 3),
        "bias": np.array([0.5], dtype=np.float32),
        "scalar": np.float32(7.0),
    }
    meta = {"kind": "test", "config": {"lr": 0.001}, "note": "hello"}
    containers.save_checkpoint(path, tensors, meta)
    back, back_meta = containers.load_checkpoint(path)
    assert back_meta == meta
    assert set(back) == {"weight", "bias", "scalar"}
    np.testing.assert_array_equal(back["weight"], tensors["weight"])
    np.testing.assert_array_equal(back["bias"], tensors["bias"])
    assert back["scalar"].shape == ()
    assert back["scalar"] == 7.0


def test_bad_magic_rejected(tmp_path):
    path = str(tmp_path / "bogus.bin")
    with open(path, "wb") as fh:
        fh.write(b"NOPE" + struct.pack("<H", 1) + b"\x00" * 16)
    with pytest.raises(ContainerError, match="magic"):
        containers.read_latent(path)
    with pytest.raises(ContainerError, match="magic"):
        containers.read_condition(path)
    with pytest.raises(ContainerError, match="magic"):
        containers.load_checkpoint(path)


def test_wrong_version_rejected(tmp_path):
    path = str(tmp_path / "future.lglt")
    with open(path, "wb") as fh:
        fh.write(b"LGLT" + struct.pack("<H", 2) + b"\x00" * 24)
    with pytest.raises(ContainerError, match="version"):
        containers.read_latent(path)


def test_truncated_payload_rejected(tmp_path):
    path = str(tmp_path / "cut.lglt")
    containers.write_latent(path, np.zeros((4, 4)), 2, 8000, 8)
    with open(path, "rb") as fh:
        blob = fh.read()
    with open(path, "wb") as fh:
        fh.write(blob[:-8])
    with pytest.raises(ContainerError, match="truncated"):
        containers.read_latent(path)


def test_truncated_header_rejected(tmp_path):
    path = str(tmp_path / "cut.lgcd")
    with open(path, "wb") as fh:
        fh.write(b"LGCD" + struct.pack("<H", 1) + b"\x00" * 4)
    with pytest.raises(ContainerError, match="truncated"):
        containers.read_condition(path)


def test_checkpoint_bad_json_rejected(tmp_path):
    path = str(tmp_path / "badjson.lgck")
    junk = b"{not json"
    with open(path, "wb") as fh:
        fh.write(b"LGCK" + struct.pack("<HQ", 1, len(junk)) + junk)
    with pytest.raises(ContainerError, match="header"):
        containers.load_checkpoint(path)


def test_checkpoint_truncated_tensor_rejected(tmp_path):
    path = str(tmp_path / "cut.lgck")
    containers.save_checkpoint(path, {"w": np.zeros((4, 4), dtype=np.float32)}, {})
    with open(path, "rb") as fh:
        blob = fh.read()
    with open(path, "wb") as fh:
        fh.write(blob[:-8])
    with pytest.raises(ContainerError, match="truncated"):
        containers.load_checkpoint(path)


def test_float32_values_bit_exact(tmp_path):
    # Values representable in float32 survive the container bit-for-bit.
    path = str(tmp_path / "exact.lgft")
    vectors = np.array([[0.1, 1.0 / 3.0], [1e-30, 123456.75]], dtype=np.float32)
    containers.write_features(path, vectors)
    back = containers.read_features(path)
    assert np.array_equal(back.astype(np.float32), vectors)
