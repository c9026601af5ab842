"""
Process configuration for the IQB engine.
Uses environment variables with sensible defaults.

The scoring configuration itself (weights, thresholds, datasets) lives in a YAML
document; see backend.iqb.model.config_file.
"""
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load .env from project root
PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent
load_dotenv(PROJECT_ROOT / ".env")

# Shipped configuration
DATA_DIR = PROJECT_ROOT / "data"
CONFIG_DIR = DATA_DIR / "config"
ADAPTERS_DIR = DATA_DIR / "adapters"
EXAMPLE_CONFIG_PATH = CONFIG_DIR / "iqb.example.yaml"
EXAMPLE_THRESHOLDS_PATH = CONFIG_DIR / "thresholds.example.yaml"


class Settings(BaseSettings):
    """Settings loaded from environment variables."""

    model_config = SettingsConfigDict(env_prefix="IQB_", extra="ignore")

    # Config path fallback when --config is not given
    config: Optional[Path] = None

    log_level: str = "WARNING"

    # Thread pool size for per-key aggregation and per-region scoring
    workers: int = Field(default=1, ge=1, le=64)

    # Fixed manifest timestamp for reproducible report bytes
    source_date_epoch: Optional[int] = Field(default=None, validation_alias="SOURCE_DATE_EPOCH")


def get_settings() -> Settings:
    """Read settings from the current environment."""
    return Settings()


def get_config_summary(settings: Settings | None = None) -> dict:
    """Return a summary of current configuration."""
    settings = settings or get_settings()
    return {
        "IQB_CONFIG": str(settings.config) if settings.config else None,
        "IQB_LOG_LEVEL": settings.log_level,
        "IQB_WORKERS": settings.workers,
        "SOURCE_DATE_EPOCH": settings.source_date_epoch,
        "example_config_exists": EXAMPLE_CONFIG_PATH.exists(),
    }
