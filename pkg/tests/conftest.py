import os

import numpy as np
import pytest
import torch

os.environ.setdefault("LOUDGEN_LOG", "quiet")
torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(0xBEEF)


@pytest.fixture(scope="session")
def tiny_toy_config():
    """Smallest config that exercises every toy-task code path."""
    from loudgen.config import default_config

    cfg = default_config()
    cfg["data"].update(dataset_size=6, m_tokens=4, cond_dim=16,
                       clip_seconds=0.5, downsample_factor=16)
    cfg["model"].update(blocks=1, embed_dim=32, heads=2, mlp_ratio=2.0)
    cfg["training"].update(steps=4, batch_size=2, log_every=4)
    return cfg


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_toy_config, tmp_path_factory):
    """A barely-trained toy checkpoint for interface and determinism tests."""
    from loudgen import toytask

    out_dir = tmp_path_factory.mktemp("tiny_toy")
    result = toytask.train_toy(tiny_toy_config, str(out_dir))
    return result["checkpoint"]


@pytest.fixture(scope="session")
def default_toy_run(tmp_path_factory):
    """Full default-configuration training run (the documented toy budget).

    Shared across the suite because it is the expensive fixture: training
    takes roughly 15 minutes on one CPU core.
    """
    from loudgen import toytask
    from loudgen.config import default_config

    out_dir = tmp_path_factory.mktemp("default_toy")
    result = toytask.train_toy(default_config(), str(out_dir))
    model, builder, cfg, ref = toytask.load_toy_checkpoint(result["checkpoint"])
    return result, model, builder, cfg
