from typing import Optional

from pydantic import BaseModel, Field

from src.models.params_model import FaultConfig, SystemParams


class PhaseCost(BaseModel):
    uplink: int = Field(0, description="Symbols sent by clients to databases")
    downlink: int = Field(0, description="Symbols sent by databases to clients")
    server: int = Field(0, description="Symbols exchanged between databases")
    remedy: int = Field(0, description="Symbols sent only because a fault remedy engaged")

    @property
    def total(self) -> int:
        return self.uplink + self.downlink + self.server


class CostReport(BaseModel):
    """Metered traffic and storage of one round, in q-ary symbols."""

    q: int = Field(..., description="Field size; bits are log2(q) per symbol")
    phases: dict[str, PhaseCost] = Field(default_factory=dict, description="Traffic per protocol phase")
    total: int = Field(0, description="Traffic over all phases, remedies excluded")
    remedy_total: int = Field(0, description="Traffic caused by fault remedies")
    storage_per_db: dict[int, int] = Field(default_factory=dict, description="Coded and plain symbols per database")
    storage_total: int = Field(0, description="Stored symbols over all live databases")
    ceilings: dict[str, int] = Field(default_factory=dict, description="Closed-form upper bounds per phase")
    psu_expected: Optional[int] = Field(None, description="Exact union-phase cost of a round without absences")
    psu_exact: Optional[bool] = Field(None, description="Union-phase traffic equals psu_expected")
    within_ceilings: Optional[bool] = Field(None, description="Every phase fits its closed-form ceiling")
    note: str = Field(
        "plain randomness is stored as K + K*L_stored symbols per database",
        description="How plain server randomness is counted",
    )


class Verdicts(BaseModel):
    """Constraint checks computed from the finished round; None means the check was not run."""

    reliability: Optional[bool] = Field(None, description="Every live database decodes to the plaintext oracle")
    union: Optional[bool] = Field(None, description="Every database decoded the oracle union")
    privacy: Optional[bool] = Field(None, description="No J databases learn individual increments")
    inter_client: Optional[bool] = Field(None, description="No routing client learns other clients' increments")
    eavesdropper: Optional[bool] = Field(None, description="Leakage of every checked E-set stays within delta")
    storage_consistency: Optional[bool] = Field(None, description="Live databases hold matching stores and plain randomness")
    cost_orders: Optional[bool] = Field(None, description="Metered traffic fits the closed-form ceilings")

    @property
    def all_pass(self) -> bool:
        return all(v is not False for v in self.model_dump().values())


class RoundReport(BaseModel):
    schema_version: int = Field(1, description="Report schema version")
    round: int = Field(..., description="Zero-based round index")
    seed: int = Field(..., description="Seed of the run")
    params: SystemParams
    faults: FaultConfig
    union: list[int] = Field(default_factory=list, description="Decoded submodel union")
    committed: bool = Field(False, description="Whether the write phase committed new storage")
    repaired: Optional[int] = Field(None, description="Database rebuilt during the round")
    leakage: str = Field("0", description="Largest measured eavesdropper leakage fraction")
    leakage_bound: str = Field("0", description="Tolerated leakage delta")
    eavesdropper_set: list[int] = Field(default_factory=list, description="Database set reaching the measured leakage")
    costs: CostReport
    verdicts: Verdicts
    transcript_hash: str = Field("", description="sha256 over the wire form of every delivered message")
    transcript_length: int = Field(0, description="Number of messages put on the bus")
    events: list[str] = Field(default_factory=list, description="Remedies and notable steps, in order")
