"""Model and training configuration models.

``ModelConfig`` holds everything needed to rebuild a network deterministically;
``TrainConfig`` adds the optimisation and data settings. Both round-trip through the
flat ``key = value`` text used by config files and checkpoints.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)

MAX_STAGES = 4
PROFILES = ("desk", "paper")


class ModelConfig(BaseModel):
    """Structure of an SMDR-IS network.

    The ``enable_*`` flags reproduce the ablation rows: ``enable_cfa_ca``,
    ``enable_cfa_pa``, ``enable_regia`` and ``enable_hcafe`` switch BICA components;
    ``enable_asisf_en``, ``enable_asisf_en_to_de`` and ``enable_asisf_de`` switch the
    ASISF gates on the cross-stage links (a disabled gate leaves an ungated link).

    Attributes:
        stages: Number of active resolution stages (1-4).
        base_channels: Width at encoder depth 0.
        channel_plan: Widths per encoder depth; defaults to base * (1, 2, 4, 8).
        regia_factor: ReGIA pooling factor.
        regia_upsample: Interpolation used to bring ReGIA weights back to full resolution.
        blocks_per_node: BICA repeats per encoder/decoder node.
        ca_reduction: Bottleneck reduction of channel and pixel attention.
        init_seed: Seed for parameter initialisation.
    """

    model_config = ConfigDict(extra="forbid")

    stages: int = Field(4, ge=1, le=MAX_STAGES, description="Active resolution stages")
    base_channels: int = Field(16, ge=1, description="Width at encoder depth 0")
    channel_plan: Optional[List[int]] = Field(
        None, description="Per-depth widths; None means base * (1, 2, 4, 8)"
    )
    regia_factor: int = Field(6, ge=1, description="ReGIA pooling factor")
    regia_upsample: Literal["bilinear", "nearest"] = Field(
        "bilinear", description="ReGIA weight upsampling mode"
    )
    blocks_per_node: int = Field(1, ge=1, description="BICA repeats per encoder/decoder node")
    ca_reduction: int = Field(4, ge=1, description="Attention bottleneck reduction")
    enable_cfa_ca: bool = Field(True, description="Channel attention inside CFA")
    enable_cfa_pa: bool = Field(True, description="Pixel attention inside CFA")
    enable_regia: bool = Field(True, description="ReGIA after CFA in branch 1")
    enable_hcafe: bool = Field(True, description="HCAFE branch 2")
    enable_asisf_en: bool = Field(True, description="ASISF on low-stage encoder -> original encoder")
    enable_asisf_en_to_de: bool = Field(
        True, description="ASISF on low-stage encoder -> original decoder"
    )
    enable_asisf_de: bool = Field(True, description="ASISF on low-stage output -> original decoder")
    init_seed: int = Field(0, description="Parameter initialisation seed")

    @field_validator("channel_plan")
    @classmethod
    def validate_channel_plan(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is None:
            return v
        if len(v) != MAX_STAGES:
            raise ValueError(f"channel_plan must list {MAX_STAGES} widths, got {len(v)}")
        if any(width < 1 for width in v):
            raise ValueError(f"channel_plan widths must be positive, got {v}")
        return list(v)

    @model_validator(mode="after")
    def validate_even_widths(self) -> "ModelConfig":
        if self.enable_hcafe and any(width % 2 for width in self.widths):
            raise ValueError(f"HCAFE needs even channel widths, got {self.widths}")
        return self

    @property
    def widths(self) -> List[int]:
        if self.channel_plan is not None:
            return list(self.channel_plan)
        return [self.base_channels * 2**depth for depth in range(MAX_STAGES)]

    def config_hash(self) -> str:
        """Stable SHA-256 over the resolved configuration."""
        payload = self.model_dump(mode="json")
        payload["channel_plan"] = self.widths
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def diff(self, other: "ModelConfig") -> Dict[str, Any]:
        """Key-wise differences as ``{key: (self_value, other_value)}``."""
        mine, theirs = self.model_dump(), other.model_dump()
        mine["channel_plan"], theirs["channel_plan"] = self.widths, other.widths
        return {key: (mine[key], theirs[key]) for key in mine if mine[key] != theirs[key]}

    def to_kv_text(self) -> str:
        return dump_kv_text(self.model_dump(mode="json"))

    @classmethod
    def from_kv_text(cls, text: str) -> "ModelConfig":
        return cls.model_validate(parse_kv_text(text))


class TrainConfig(BaseModel):
    """Training run configuration.

    The three loss flags reproduce the loss ablation rows: a disabled component
    contributes exactly zero and is never evaluated.
    """

    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig, description="Network structure")
    lr: float = Field(2e-4, gt=0, description="Adam learning rate")
    batch_size: int = Field(4, ge=1, description="Samples per iteration")
    crop: int = Field(64, ge=8, description="Random square crop side")
    iterations: int = Field(500, ge=0, description="Total optimisation steps")
    seed: int = Field(0, description="Seed for data order and crops")
    enable_l1: bool = Field(True, description="Use the L1 term")
    enable_pre: bool = Field(True, description="Use the perceptual term")
    enable_mse: bool = Field(True, description="Use the MSE term")
    l1_weight: float = Field(1.0, ge=0, description="Weight of the L1 term")
    perceptual_weight: float = Field(0.2, ge=0, description="Weight of the perceptual term")
    mse_weight: float = Field(1.0, ge=0, description="Weight of the MSE term")
    perceptual: Literal["random", "vgg"] = Field("random", description="Perceptual extractor")
    data_root: Optional[Path] = Field(None, description="Paired training dataset root")
    val_root: Optional[Path] = Field(None, description="Paired validation dataset root")
    checkpoint_dir: Path = Field(Path("./output/checkpoints"), description="Checkpoint directory")
    checkpoint_every: int = Field(0, ge=0, description="Checkpoint cadence; 0 means end only")
    log_every: int = Field(1, ge=1, description="Log record cadence")
    workers: int = Field(1, ge=1, description="Evaluation worker threads")

    @field_validator("crop")
    @classmethod
    def validate_crop(cls, v: int, info: ValidationInfo) -> int:
        if v % 8 != 0:
            raise ValueError(f"Field '{info.field_name}' must be a multiple of 8, got {v}")
        return v

    def to_kv_text(self) -> str:
        return dump_kv_text(self.model_dump(mode="json"))

    @classmethod
    def from_kv_text(cls, text: str) -> "TrainConfig":
        return cls.model_validate(parse_kv_text(text))


PROFILE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "desk": {
        "batch_size": 4,
        "crop": 64,
        "iterations": 500,
        "lr": 1e-3,
        "model": {"base_channels": 8},
    },
    "paper": {
        "batch_size": 44,
        "crop": 256,
        "iterations": 100000,
        "lr": 2e-4,
        "perceptual": "vgg",
        "model": {"base_channels": 32},
    },
}


def _flatten(values: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in values.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def _nest(flat: Dict[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return nested


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Merge dotted-key overrides into a nested dict (later wins)."""
    flat = _flatten(base)
    flat.update(_flatten(overrides))
    return _nest(flat)


def dump_kv_text(values: Dict[str, Any]) -> str:
    lines = []
    for key, value in sorted(_flatten(values).items()):
        lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _strip_comment(line: str) -> str:
    """Cut a ``#`` comment that starts the line or follows whitespace outside quotes."""
    quoted = False
    for index, char in enumerate(line):
        if char == '"' and (index == 0 or line[index - 1] != "\\"):
            quoted = not quoted
        elif char == "#" and not quoted and (index == 0 or line[index - 1].isspace()):
            return line[:index]
    return line


def parse_kv_text(text: str) -> Dict[str, Any]:
    """Parse ``key = value`` lines into a nested dict.

    Values are read as JSON when possible (numbers, booleans, lists, ``null``) and as
    bare strings otherwise. Blank lines and ``#`` comments are ignored; a ``#`` inside a
    quoted value or glued to a value (``runs/#3``) is kept.

    Raises:
        ValueError: On a line without ``=``.
    """
    flat: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {number}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {number}: empty key")
        flat[key] = _parse_value(value)
    return _nest(flat)


def resolve_train_config(
    profile: str = "desk",
    config_text: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> TrainConfig:
    """Resolve a TrainConfig with precedence profile < config file < overrides."""
    if profile not in PROFILE_DEFAULTS:
        raise ValueError(f"Unknown profile '{profile}', expected one of {PROFILES}")
    values = dict(PROFILE_DEFAULTS[profile])
    if config_text:
        values = merge_overrides(values, parse_kv_text(config_text))
    if overrides:
        values = merge_overrides(values, overrides)
    return TrainConfig.model_validate(values)
