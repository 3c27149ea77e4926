"""Dataset records: paired samples and the synthetic dataset manifest."""

from pathlib import Path
from typing import List, Literal, Tuple

from pydantic import BaseModel, Field, field_validator

MANIFEST_SCHEMA_VERSION = 1

TransmissionStyle = Literal["uniform", "linear-gradient", "radial", "perlin-like"]


class PairedSample(BaseModel):
    """A degraded image and its reference, matched by file stem."""

    id: str = Field(..., description="Shared filename stem")
    raw_path: Path = Field(..., description="Degraded image")
    reference_path: Path = Field(..., description="Reference (clean) image")


class ManifestEntry(BaseModel):
    """Degradation parameters of one synthetic sample.

    ``make_transmission(size, size, seed, style, t_min, t_max, channel_wise)`` regenerates
    the transmission field exactly.
    """

    id: str
    seed: int = Field(..., description="Seed of this sample's transmission and scene")
    style: TransmissionStyle
    t_min: float = Field(..., ge=0.05, le=1.0)
    t_max: float = Field(..., ge=0.05, le=1.0)
    channel_wise: bool = True
    ambient: Tuple[float, float, float] = Field(..., description="Ambient light A (RGB)")

    @field_validator("ambient")
    @classmethod
    def validate_ambient(cls, v: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(not 0.0 <= c <= 1.0 for c in v):
            raise ValueError(f"ambient light must lie in [0, 1]^3, got {v}")
        return v


class SyntheticManifest(BaseModel):
    """``manifest.json`` of an emitted synthetic dataset."""

    schema_version: int = Field(MANIFEST_SCHEMA_VERSION)
    seed: int
    size: int
    samples: List[ManifestEntry] = Field(default_factory=list)
