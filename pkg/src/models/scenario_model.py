from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.config.settings import get_settings
from src.models.params_model import FaultConfig, RoundInputs, SystemParams

settings = get_settings()


class ScenarioConfig(BaseModel):
    """A runnable scenario as written in a JSON file."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = Field(settings.SCHEMA_VERSION, description="Scenario schema version")
    params: SystemParams
    inputs: RoundInputs = Field(default_factory=RoundInputs)
    increments_file: Optional[str] = Field(
        None, description="JSON file mapping client id to a K x L increment matrix, read when increment_source is 'file'"
    )
    faults: FaultConfig = Field(default_factory=FaultConfig)
    seed: Optional[int] = Field(None, ge=0, description="Seed of the run; DEFAULT_SEED when omitted")
    rounds: int = Field(1, ge=1, le=settings.MAX_ROUNDS, description="Consecutive rounds run with the same inputs and faults")
    initial_model: Optional[list[list[int]]] = Field(None, description="K x L starting model; seeded random when omitted")
    output: Optional[str] = Field(None, description="Report path")
    transcript: Optional[str] = Field(None, description="Transcript dump path")

    @field_validator("schema_version")
    @classmethod
    def known_version(cls, value):
        if value != settings.SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {value}, expected {settings.SCHEMA_VERSION}")
        return value
