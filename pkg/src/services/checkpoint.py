"""Checkpoint archives.

A checkpoint is one ``torch.save`` file holding only tensors and primitive containers,
so it loads with ``weights_only=True``:

``format_version``   integer, currently 1
``config``           the TrainConfig as ``key = value`` text
``config_hash``      SHA-256 of the model configuration
``model``            named parameter tensors
``optimizer``        optimizer state (absent for weight-only exports)
``generator``        state of the data-order/crop generator
``torch_rng``        global torch RNG state
``iteration``        completed optimisation steps
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import torch

from src.models.config_model import ModelConfig, TrainConfig
from src.network.smdr import SMDRIS, build_model
from src.utils.errors import CheckpointError, ConfigMismatchError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
REQUIRED_KEYS = ("format_version", "config", "config_hash", "model", "iteration")


@dataclass
class Checkpoint:
    """Decoded checkpoint contents."""

    train_config: TrainConfig
    config_hash: str
    model_state: Dict[str, torch.Tensor]
    iteration: int = 0
    optimizer_state: Optional[Dict[str, Any]] = None
    generator_state: Optional[torch.Tensor] = None
    torch_rng_state: Optional[torch.Tensor] = None

    @property
    def model_config(self) -> ModelConfig:
        return self.train_config.model


def save_checkpoint(
    path: Path,
    model: SMDRIS,
    cfg: TrainConfig,
    optimizer: Optional[torch.optim.Optimizer] = None,
    generator: Optional[torch.Generator] = None,
    iteration: int = 0,
) -> Path:
    """Write a checkpoint atomically (temporary file, then rename)."""
    payload: Dict[str, Any] = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": cfg.to_kv_text(),
        "config_hash": cfg.model.config_hash(),
        "model": {name: t.detach().clone() for name, t in model.state_dict().items()},
        "iteration": int(iteration),
        "torch_rng": torch.get_rng_state(),
    }
    if optimizer is not None:
        payload["optimizer"] = optimizer.state_dict()
    if generator is not None:
        payload["generator"] = generator.get_state()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    logger.debug("saved checkpoint %s at iteration %d", path, iteration)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """Read and validate a checkpoint without touching any model.

    Raises:
        CheckpointError: If the file is missing, unreadable, of another format version,
            or its stored hash disagrees with its stored configuration.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    if not isinstance(payload, dict) or any(key not in payload for key in REQUIRED_KEYS):
        raise CheckpointError(f"checkpoint {path} is missing required entries {REQUIRED_KEYS}")
    if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has format version {payload['format_version']}, "
            f"expected {CHECKPOINT_FORMAT_VERSION}"
        )
    try:
        cfg = TrainConfig.from_kv_text(payload["config"])
    except ValueError as exc:
        raise CheckpointError(f"checkpoint {path} carries an invalid config: {exc}") from exc
    if cfg.model.config_hash() != payload["config_hash"]:
        raise CheckpointError(f"checkpoint {path} config hash does not match its config")

    return Checkpoint(
        train_config=cfg,
        config_hash=payload["config_hash"],
        model_state=payload["model"],
        iteration=int(payload["iteration"]),
        optimizer_state=payload.get("optimizer"),
        generator_state=payload.get("generator"),
        torch_rng_state=payload.get("torch_rng"),
    )


def verify_config(checkpoint: Checkpoint, expected: ModelConfig) -> None:
    """Raise ConfigMismatchError with a key-wise diff if the model configs differ."""
    if checkpoint.config_hash != expected.config_hash():
        raise ConfigMismatchError(
            "checkpoint was written with a different model configuration",
            diff=expected.diff(checkpoint.model_config),
        )


def load_model(path: Path) -> Tuple[SMDRIS, Checkpoint]:
    """Rebuild the network stored in a checkpoint, in evaluation mode."""
    checkpoint = load_checkpoint(path)
    model = build_model(checkpoint.model_config)
    try:
        model.load_state_dict(checkpoint.model_state, strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint {path} tensors do not fit the model: {exc}") from exc
    model.eval()
    return model, checkpoint
