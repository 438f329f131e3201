"""Application configuration management."""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings loaded from environment variables."""

    threads: int = Field(default=4, ge=1)
    log_level: str = "INFO"
    output_dir: str = "out"

    quad_tol: float = Field(default=1e-10, gt=0)
    quad_max_panels: int = Field(default=20000, ge=1)

    max_condition: float = Field(default=1e14, gt=1)
    eigen_max_iters: int = Field(default=500, ge=1)
    eigen_tol: float = Field(default=1e-12, gt=0)

    # Largest half-integer Bessel order accepted by specfun.bessel_j.
    max_bessel_order: float = Field(default=2.5, ge=0.5)

    radial_nodes: int = Field(default=513, ge=5)
    rect_nodes: int = Field(default=65, ge=5)
    polar_rings: int = Field(default=48, ge=4)
    polar_angles: int = Field(default=64, ge=8)

    model_config = SettingsConfigDict(
        env_prefix="RESCURVE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return cached settings."""

    return Settings()
