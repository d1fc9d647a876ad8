from enum import Enum
from typing import Any

from pydantic import BaseModel, Field


class MessageKind(str, Enum):
    AU1 = "AU1"
    DU2 = "DU2"
    AU2 = "AU2"
    DW1REQ = "DW1req"
    DW1RESP = "DW1resp"
    AW1 = "AW1"
    DW2 = "DW2"
    AW2 = "AW2"
    REPAIR_SHARE = "RepairShare"
    CR_BROADCAST = "CrBroadcast"
    CRR_SHARE = "CrrShare"


class Phase(str, Enum):
    CRG = "crg"
    PSU = "psu"
    WRITE = "write"
    CRR = "crr"
    REPAIR = "repair"


def client_endpoint(client_id: int) -> str:
    return f"C{client_id}"


def db_endpoint(db_id: int) -> str:
    return f"DB{db_id}"


def endpoint_id(endpoint: str) -> int:
    return int(endpoint.lstrip("CDB"))


def is_db(endpoint: str) -> bool:
    return endpoint.startswith("DB")


class PhaseMessage(BaseModel):
    """One payload moving between a client and a database."""

    kind: MessageKind = Field(..., description="Protocol message kind")
    phase: Phase = Field(..., description="Phase the message belongs to")
    sender: str = Field(..., description="Sending endpoint, e.g. C3 or DB2")
    receiver: str = Field(..., description="Receiving endpoint")
    payload: list[int] = Field(default_factory=list, description="Field symbols in canonical form")
    meta: dict[str, Any] = Field(default_factory=dict, description="Submodels, groups, positions, roles")
    remedy: bool = Field(False, description="Traffic that exists only because a fault remedy engaged")

    @property
    def length(self) -> int:
        return len(self.payload)
