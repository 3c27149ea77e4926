"""Environment-driven settings.

Values come from the process environment, optionally seeded from a ``.env`` file
in the working directory.
"""

import os
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

# Load environment variables
load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"


class Settings(BaseModel):
    """Process-wide settings read from the environment.

    Attributes:
        log_level: Logging level name (``LOG_LEVEL``).
        output_dir: Default directory for run artifacts (``OUTPUT_DIR``).
        cache_dir: Cache for pretrained perceptual-extractor weights (``SMDRIS_CACHE``).
    """

    log_level: str = Field("INFO", description="Logging level name")
    output_dir: Path = Field(Path("./output"), description="Default artifact directory")
    cache_dir: Path = Field(
        Path.home() / ".cache" / "smdris",
        description="Perceptual extractor weight cache",
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown LOG_LEVEL '{v}'")
        return level


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Build settings from environment variables (cached)."""
    values = {}
    if os.getenv("LOG_LEVEL"):
        values["log_level"] = os.getenv("LOG_LEVEL")
    if os.getenv("OUTPUT_DIR"):
        values["output_dir"] = Path(os.environ["OUTPUT_DIR"])
    if os.getenv("SMDRIS_CACHE"):
        values["cache_dir"] = Path(os.environ["SMDRIS_CACHE"]).expanduser()
    return Settings(**values)
