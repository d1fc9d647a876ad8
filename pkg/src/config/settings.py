from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Field
    FIELD_MODULUS: int = Field(13, description="Prime modulus q of the working field")
    # Simulation
    DEFAULT_SEED: int = Field(0, description="Seed used when neither the scenario nor the CLI sets one")
    MAX_ROUNDS: int = Field(50, description="Upper bound on rounds in a multi-round run")
    EXHAUSTIVE_SUBSET_LIMIT: int = Field(
        8, description="Maximum number of database subsets enumerated by the leakage checks"
    )
    SCHEMA_VERSION: int = Field(1, description="Scenario and report schema version")
    # Output
    REPORT_PATH: str = Field("report.json", description="Default path of the round report")
    TRANSCRIPT_PATH: Optional[str] = Field(None, description="Path of the transcript dump, disabled when unset")
    LOG_LEVEL: str = Field("WARNING", description="Root log level")

    class Config:
        env_file = ".env"


def get_settings():
    return Settings()
