"""Pydantic models for configuration, datasets and reports."""

from src.models.config_model import ModelConfig, TrainConfig, resolve_train_config
from src.models.dataset_model import ManifestEntry, PairedSample, SyntheticManifest
from src.models.report_model import (
    AblationRow,
    AblationSummary,
    LossReport,
    MetricReport,
    StageLossReport,
    StructureEntry,
    StructureReport,
    TrainLogRecord,
)

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "resolve_train_config",
    "ManifestEntry",
    "PairedSample",
    "SyntheticManifest",
    "AblationRow",
    "AblationSummary",
    "LossReport",
    "MetricReport",
    "StageLossReport",
    "StructureEntry",
    "StructureReport",
    "TrainLogRecord",
]
