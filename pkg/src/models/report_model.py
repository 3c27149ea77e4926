"""Report models: losses, training log records, metric tables, structure and ablation summaries."""

import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

Direction = Literal["higher", "lower"]


class StageLossReport(BaseModel):
    """Loss components of one stage."""

    stage: int = Field(..., ge=1, description="1-based stage index")
    l1: float = Field(..., ge=0)
    perceptual: float = Field(..., ge=0)
    mse: float = Field(..., ge=0)
    combined: float = Field(..., ge=0, description="l1 + 0.2 * perceptual + mse (weighted)")


class LossReport(BaseModel):
    """Per-stage components and the multi-degradation total."""

    per_stage: List[StageLossReport] = Field(default_factory=list)
    total: float = Field(..., description="Sum of combined stage losses")


class TrainLogRecord(BaseModel):
    """One JSON line of the training log."""

    iteration: int = Field(..., ge=0)
    per_stage: List[StageLossReport] = Field(default_factory=list)
    total: float
    seconds: float = Field(..., ge=0, description="Wall-clock seconds since the run started")
    status: Literal["ok", "non_finite"] = "ok"


class MetricReport(BaseModel):
    """Per-image metric rows plus their mean.

    Attributes:
        directions: Metric name -> ``higher`` or ``lower`` is better. Columns absent
            from ``directions`` (image id, seconds, composites) do not enter ALL.
        rows: One dict per image; always holds ``image``.
        mean: Column means over all rows, with ``image == "mean"``.
        skipped: Number of images that could not be read.
    """

    directions: Dict[str, Direction] = Field(default_factory=dict)
    rows: List[Dict[str, object]] = Field(default_factory=list)
    mean: Dict[str, object] = Field(default_factory=dict)
    skipped: int = Field(0, ge=0)
    paper_compat: bool = Field(False, description="MSE column carries RMSE")

    @field_validator("rows")
    @classmethod
    def validate_rows_finite(cls, rows: List[Dict[str, object]]) -> List[Dict[str, object]]:
        for row in rows:
            for key, value in row.items():
                if isinstance(value, float) and not math.isfinite(value):
                    raise ValueError(f"metric '{key}' is not finite in row {row.get('image')}")
        return rows

    @property
    def columns(self) -> List[str]:
        if not self.rows:
            return ["image"]
        return list(self.rows[0].keys())


class StructureEntry(BaseModel):
    """One named sub-block of the network."""

    name: str
    kind: str
    parameters: int = Field(..., ge=0)
    output_shape: Optional[List[int]] = None


class StructureReport(BaseModel):
    """Every sub-block with shapes and parameter counts."""

    entries: List[StructureEntry] = Field(default_factory=list)
    total_parameters: int = Field(..., ge=0)
    input_size: int = Field(..., ge=1)

    def names(self) -> List[str]:
        return [entry.name for entry in self.entries]

    def to_text(self) -> str:
        width = max((len(entry.name) for entry in self.entries), default=4)
        lines = [f"{'name':<{width}}  {'kind':<14} {'params':>10}  output"]
        for entry in self.entries:
            shape = "x".join(str(d) for d in entry.output_shape) if entry.output_shape else "-"
            lines.append(f"{entry.name:<{width}}  {entry.kind:<14} {entry.parameters:>10}  {shape}")
        lines.append(f"{'total':<{width}}  {'':<14} {self.total_parameters:>10}")
        return "\n".join(lines)


class AblationRow(BaseModel):
    """Result of one ablation configuration."""

    label: str
    flags: Dict[str, object] = Field(default_factory=dict)
    parameters: int = Field(..., ge=0)
    final_loss: float
    psnr: float
    ssim: float
    all: float = Field(..., description="PSNR + SSIM, the ablation-table composite")


class AblationSummary(BaseModel):
    matrix: str
    iterations: int
    rows: List[AblationRow] = Field(default_factory=list)
