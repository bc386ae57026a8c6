from typing import Literal, Optional

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.models.simulation import Axis, VarianceConvention


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix AOI_) and .env."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="AOI_",
        case_sensitive=False,
        extra="ignore",
    )

    # Worker pool
    threads: int = Field(default=1, ge=1)
    executor: Literal["thread", "process"] = "thread"

    # Numerics
    history_depth: int = Field(default=512, ge=1)
    diag_tol: float = Field(default=1e-8, gt=0.0, lt=1.0)

    # Model-vs-simulation comparison
    confidence: float = Field(default=0.99, gt=0.0, lt=1.0)
    acceptance_fraction: float = Field(default=0.95, gt=0.0, le=1.0)
    rare_event_threshold: float = Field(default=1e-7, ge=0.0)
    default_convention: VarianceConvention = VarianceConvention.PAPER_SHIFTED
    default_axis: Axis = Axis.STD_DEV

    # Output
    output_format: Literal["csv", "json"] = "csv"
    log_level: str = "INFO"

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level


def load_settings() -> tuple[Settings, Optional[ValidationError]]:
    """Settings from the environment, or the defaults and the error when a value is invalid."""
    try:
        return Settings(), None
    except ValidationError as e:
        return Settings.model_construct(), e


# Global settings instance; main() reports settings_error and exits 1
settings, settings_error = load_settings()
