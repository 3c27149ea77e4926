"""Tests for checkpoint archives."""

import pytest
import torch

from src.models.config_model import ModelConfig, TrainConfig
from src.network.smdr import build_model
from src.services.checkpoint import (
    CHECKPOINT_FORMAT_VERSION,
    load_checkpoint,
    load_model,
    save_checkpoint,
    verify_config,
)
from src.utils.errors import CheckpointError, ConfigMismatchError
from src.utils.pyramid import build_input_pyramid


@pytest.fixture
def train_config(small_model_config) -> TrainConfig:
    return TrainConfig(model=small_model_config, crop=48, batch_size=2)


def _payload(cfg: TrainConfig, model) -> dict:
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": cfg.to_kv_text(),
        "config_hash": cfg.model.config_hash(),
        "model": model.state_dict(),
        "iteration": 0,
    }


class TestRoundTrip:
    """Saved weights reload into an identical network."""

    def test_eval_outputs_are_bitwise_equal(self, tmp_path, train_config, generator):
        model = build_model(train_config.model).eval()
        with torch.no_grad():
            for param in model.parameters():
                param.add_(0.01 * torch.randn(param.shape, generator=generator))
        path = save_checkpoint(tmp_path / "model.pt", model, train_config, iteration=7)

        restored, checkpoint = load_model(path)
        assert not restored.training
        assert checkpoint.iteration == 7
        pyramid = build_input_pyramid(torch.rand(1, 3, 48, 48, generator=generator))
        with torch.no_grad():
            expected = model(pyramid).outputs
            actual = restored(pyramid).outputs
        assert all(torch.equal(a, b) for a, b in zip(expected, actual))

    def test_config_survives(self, tmp_path, train_config):
        model = build_model(train_config.model)
        path = save_checkpoint(tmp_path / "model.pt", model, train_config)
        checkpoint = load_checkpoint(path)
        assert checkpoint.train_config == train_config
        assert checkpoint.config_hash == train_config.model.config_hash()

    def test_training_state_is_stored(self, tmp_path, train_config):
        model = build_model(train_config.model)
        optimizer = torch.optim.Adam(model.parameters(), lr=train_config.lr)
        generator = torch.Generator().manual_seed(3)
        torch.rand(5, generator=generator)
        path = save_checkpoint(
            tmp_path / "model.pt", model, train_config, optimizer, generator, iteration=2
        )
        checkpoint = load_checkpoint(path)
        assert checkpoint.optimizer_state is not None
        assert torch.equal(checkpoint.generator_state, generator.get_state())
        assert checkpoint.torch_rng_state is not None

    def test_write_is_atomic(self, tmp_path, train_config):
        save_checkpoint(tmp_path / "ck" / "model.pt", build_model(train_config.model), train_config)
        assert [p.name for p in (tmp_path / "ck").iterdir()] == ["model.pt"]


class TestRejection:
    """Unreadable or inconsistent archives raise CheckpointError."""

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "missing.pt")

    def test_garbage_file(self, tmp_path):
        path = tmp_path / "garbage.pt"
        path.write_bytes(b"\x00\x01 definitely not a checkpoint")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_unknown_format_version(self, tmp_path, train_config):
        payload = _payload(train_config, build_model(train_config.model))
        payload["format_version"] = CHECKPOINT_FORMAT_VERSION + 1
        torch.save(payload, tmp_path / "future.pt")
        with pytest.raises(CheckpointError) as exc_info:
            load_checkpoint(tmp_path / "future.pt")
        assert "format version" in str(exc_info.value)

    def test_missing_entries(self, tmp_path, train_config):
        payload = _payload(train_config, build_model(train_config.model))
        del payload["model"]
        torch.save(payload, tmp_path / "partial.pt")
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "partial.pt")

    def test_hash_mismatch(self, tmp_path, train_config):
        payload = _payload(train_config, build_model(train_config.model))
        payload["config_hash"] = "0" * 64
        torch.save(payload, tmp_path / "tampered.pt")
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "tampered.pt")

    def test_tensors_that_do_not_fit(self, tmp_path, train_config):
        payload = _payload(train_config, build_model(ModelConfig(base_channels=16)))
        torch.save(payload, tmp_path / "wrong.pt")
        with pytest.raises(CheckpointError):
            load_model(tmp_path / "wrong.pt")


class TestVerifyConfig:
    """Model configuration comparison."""

    def test_matching_config_passes(self, tmp_path, train_config):
        path = save_checkpoint(tmp_path / "m.pt", build_model(train_config.model), train_config)
        verify_config(load_checkpoint(path), train_config.model)

    def test_mismatch_reports_diff(self, tmp_path, train_config):
        path = save_checkpoint(tmp_path / "m.pt", build_model(train_config.model), train_config)
        with pytest.raises(ConfigMismatchError) as exc_info:
            verify_config(load_checkpoint(path), ModelConfig(base_channels=16))
        assert exc_info.value.diff["base_channels"] == (16, 8)
        assert "base_channels" in str(exc_info.value)
