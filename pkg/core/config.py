"""
Application Configuration Management
Process-wide solver, exploration and logging settings
"""

from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables (prefix RAFTPERF_)"""

    model_config = SettingsConfigDict(
        env_prefix="RAFTPERF_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = Field(default="raft-performability", description="Tool name in result metadata")
    app_version: str = Field(default="1.0.0", description="Tool version in result metadata")

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    log_file: Optional[str] = Field(default=None, description="Log file path")

    # Transient solver
    solver_eps: float = Field(
        default=1e-9,
        description="Total Poisson truncation tolerance, split evenly between both tails",
        gt=0.0,
        lt=1.0
    )
    max_uniformization_steps: int = Field(
        default=5_000_000,
        description="Largest Poisson right truncation point handled by the power sequence",
        gt=0
    )
    dense_state_limit: int = Field(
        default=4000,
        description="Largest chain stepped with a dense exp(Q*dt) propagator on stiff horizons",
        gt=0
    )

    # State-space exploration
    max_states: int = Field(
        default=20_000_000,
        description="Abort exploration beyond this many tangible markings",
        gt=0
    )
    max_tokens_per_place: int = Field(
        default=2 ** 16,
        description="Token cap per place",
        gt=0
    )

    # Monte Carlo oracle
    des_runs: int = Field(default=100_000, description="Replications per oracle estimate", ge=2)
    des_seed: int = Field(default=2019, description="Root seed of the oracle substreams", ge=0)

    # Studies
    study_workers: int = Field(default=1, description="Parallel worker slots for study points", ge=1)
    output_format: str = Field(default="csv", description="Default result format (csv|json)")


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get application settings instance"""
    return settings
