"""Shared fixtures: small model configs, seeded tensors and a synthetic dataset."""

from pathlib import Path

import pytest
import torch

from src.models.config_model import ModelConfig, TrainConfig, resolve_train_config
from src.services.data_io import emit_synthetic_dataset


@pytest.fixture
def small_model_config() -> ModelConfig:
    """Desk-sized network: widths 8, 16, 32, 64."""
    return ModelConfig(base_channels=8, init_seed=0)


@pytest.fixture
def generator() -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(1234)
    return g


@pytest.fixture(scope="session")
def synthetic_root(tmp_path_factory) -> Path:
    """Four 72x72 synthetic pairs, emitted once per session."""
    root = tmp_path_factory.mktemp("synthetic")
    emit_synthetic_dataset(4, 72, 7, root)
    return root


@pytest.fixture
def quick_train_config(tmp_path, synthetic_root) -> TrainConfig:
    """A few cheap iterations on the synthetic set."""
    return resolve_train_config(
        "desk",
        overrides={
            "iterations": 3,
            "crop": 48,
            "batch_size": 2,
            "seed": 11,
            "data_root": str(synthetic_root),
            "checkpoint_dir": str(tmp_path / "checkpoints"),
        },
    )
