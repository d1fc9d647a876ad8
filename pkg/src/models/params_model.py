from fractions import Fraction
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.settings import get_settings

settings = get_settings()


def canonical_fraction(value) -> str:
    """Normalize '1/2', '0.5', 0.5 or 1 to the reduced string form."""
    try:
        return str(Fraction(str(value)))
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"not a rational number: {value!r}") from e


class SystemParams(BaseModel):
    """Sizes, thresholds and field of one distributed learning deployment."""

    model_config = ConfigDict(extra="forbid")

    N: int = Field(..., ge=2, description="Number of databases")
    C: int = Field(..., ge=0, description="Number of clients")
    K: int = Field(..., ge=1, description="Number of submodels")
    L: int = Field(..., ge=1, description="Symbols per submodel")
    D: int = Field(..., ge=2, description="Reconstruction threshold")
    J: int = Field(..., ge=1, description="Largest colluding database set for client privacy")
    E: int = Field(..., ge=1, description="Eavesdropped database count")
    A: int = Field(0, ge=0, description="Byzantine database count")
    delta: str = Field("0", description="Tolerated leakage fraction of the full model")
    q: int = Field(settings.FIELD_MODULUS, ge=2, description="Prime field modulus")
    psis: Optional[list[int]] = Field(None, description="Evaluation points, one per database")
    group_assignment: dict[int, int] = Field(
        default_factory=dict, description="Client id to database id"
    )

    @field_validator("delta", mode="before")
    @classmethod
    def normalize_delta(cls, value):
        return canonical_fraction(value)

    @model_validator(mode="after")
    def fill_groups(self):
        if not self.group_assignment:
            self.group_assignment = {i: (i - 1) % self.N + 1 for i in range(1, self.C + 1)}
        if sorted(self.group_assignment) != list(range(1, self.C + 1)):
            raise ValueError("group_assignment must list every client 1..C exactly once")
        if self.psis is not None and len(self.psis) != self.N:
            raise ValueError(f"psis must hold N={self.N} points")
        return self

    @property
    def leak(self) -> Fraction:
        return Fraction(self.delta)

    @property
    def psi_values(self) -> list[int]:
        return list(self.psis) if self.psis is not None else list(range(1, self.N + 1))

    @property
    def client_ids(self) -> list[int]:
        return list(range(1, self.C + 1))

    @property
    def db_ids(self) -> list[int]:
        return list(range(1, self.N + 1))

    def group(self, db: int) -> list[int]:
        return sorted(i for i, j in self.group_assignment.items() if j == db)


def _sorted_unique(values):
    return sorted(set(values))


class FaultConfig(BaseModel):
    """Faults injected into one round."""

    model_config = ConfigDict(extra="forbid")

    dropped_clients: list[int] = Field(default_factory=list, description="Clients that never deliver")
    late_clients: list[int] = Field(default_factory=list, description="Clients whose answers arrive after aggregation")
    late_delay: int = Field(1, ge=1, description="Extra bus steps taken by late answers")
    dropped_dbs: list[int] = Field(default_factory=list, description="Databases silent for the round")
    failed_db: Optional[int] = Field(None, description="Database lost at round start and rebuilt")
    eavesdropper_set: list[int] = Field(default_factory=list, description="Databases read by the eavesdropper")
    adversary_set: list[int] = Field(default_factory=list, description="Databases corrupting outbound payloads")
    corruption: Literal["random", "targeted-flip", "replay"] = Field(
        "random", description="Corruption strategy of adversarial databases"
    )

    @field_validator(
        "dropped_clients", "late_clients", "dropped_dbs", "eavesdropper_set", "adversary_set", mode="after"
    )
    @classmethod
    def sort_ids(cls, value):
        return _sorted_unique(value)

    @property
    def absent_clients(self) -> set[int]:
        return set(self.dropped_clients) | set(self.late_clients)

    def is_empty(self) -> bool:
        return self == FaultConfig()


class RoundInputs(BaseModel):
    """What the clients bring to a round: desired submodels and, optionally, their increments."""

    model_config = ConfigDict(extra="forbid")

    gammas: dict[int, list[int]] = Field(default_factory=dict, description="Client id to desired submodels")
    increments: Optional[dict[int, list[list[int]]]] = Field(
        None, description="Client id to a K x L increment matrix; seeded random when omitted"
    )
    increment_source: Literal["seeded-random", "file"] = Field("seeded-random")

    @field_validator("gammas", mode="after")
    @classmethod
    def sort_gammas(cls, value):
        return {i: _sorted_unique(ks) for i, ks in sorted(value.items())}
