import pytest
import yaml

from loudgen import config
from loudgen.errors import ConfigError


def test_defaults_have_expected_sections():
    cfg = config.default_config()
    assert set(cfg) == {"seed", "data", "model", "diffusion", "training"}
    assert cfg["data"]["sample_rate"] == 8000
    assert cfg["data"]["latent_scale"] > 0
    assert cfg["diffusion"]["objective"] == "v"
    assert cfg["training"]["warmup_steps"] >= 1


def test_default_config_is_a_fresh_copy():
    one = config.default_config()
    one["data"]["sample_rate"] = 123
    assert config.default_config()["data"]["sample_rate"] == 8000


def test_load_config_none_returns_defaults():
    assert config.load_config(None) == config.default_config()


def test_load_config_merges_partial_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("training:\n  lr: 0.01\nseed: 7\n")
    cfg = config.load_config(str(path))
    assert cfg["training"]["lr"] == 0.01
    assert cfg["seed"] == 7
    assert cfg["training"]["batch_size"] == config.default_config()["training"]["batch_size"]


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("data:\n  bogus_knob: 1\n")
    with pytest.raises(ConfigError, match="bogus_knob"):
        config.load_config(str(path))
    path.write_text("not_a_section: 1\n")
    with pytest.raises(ConfigError, match="not_a_section"):
        config.load_config(str(path))


def test_load_config_rejects_scalar_for_section(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("data: 5\n")
    with pytest.raises(ConfigError, match="mapping"):
        config.load_config(str(path))


def test_load_config_rejects_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load_config(str(tmp_path / "nope.yaml"))


def test_load_config_rejects_malformed_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("data: [unclosed\n")
    with pytest.raises(ConfigError, match="malformed"):
        config.load_config(str(path))


def test_load_config_rejects_non_mapping_root(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("- just\n- a\n- list\n")
    with pytest.raises(ConfigError, match="mapping"):
        config.load_config(str(path))


def test_apply_overrides_coerces_types():
    cfg = config.default_config()
    config.apply_overrides(
        cfg, ["training.lr=1e-4", "data.m_tokens=24", "diffusion.objective=epsilon"]
    )
    assert cfg["training"]["lr"] == pytest.approx(1e-4)
    assert cfg["data"]["m_tokens"] == 24
    assert isinstance(cfg["data"]["m_tokens"], int)
    assert cfg["diffusion"]["objective"] == "epsilon"


def test_apply_overrides_rejects_bad_forms():
    cfg = config.default_config()
    with pytest.raises(ConfigError, match="key=value"):
        config.apply_overrides(cfg, ["training.lr"])
    with pytest.raises(ConfigError, match="unknown config key"):
        config.apply_overrides(cfg, ["training.nope=1"])
    with pytest.raises(ConfigError, match="unknown config key"):
        config.apply_overrides(cfg, ["nope.lr=1"])
    with pytest.raises(ConfigError, match="section"):
        config.apply_overrides(cfg, ["data=5"])


def test_dump_config_round_trips():
    cfg = config.default_config()
    cfg["training"]["lr"] = 0.005
    assert yaml.safe_load(config.dump_config(cfg)) == cfg


def test_split_seed_is_stable_and_label_sensitive():
    a = config.split_seed(0, "dataset")
    assert a == config.split_seed(0, "dataset")
    assert a != config.split_seed(0, "model")
    assert a != config.split_seed(1, "dataset")
    for seed in (0, 1, 2**40):
        for label in ("x", "y"):
            value = config.split_seed(seed, label)
            assert 0 <= value < 2**63
