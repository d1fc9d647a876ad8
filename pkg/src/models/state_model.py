from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import galois

from src.models.codec_model import CodedRow


@dataclass
class ClientState:
    """A client's inputs and the common randomness it holds for one round.

    Client-side sets are indexed by position in `crg_clients`; router sets by
    position in `crg_groups`. Only routing clients hold the full sets.
    """

    client_id: int
    group: int
    gamma: frozenset[int]
    incidence: galois.FieldArray
    increments: galois.FieldArray
    c: Optional[galois.FieldArray] = None
    w_psu: Optional[galois.FieldArray] = None
    w_write: Optional[galois.FieldArray] = None
    is_router: bool = False
    crg_clients: tuple[int, ...] = ()
    crg_groups: tuple[int, ...] = ()
    client_set_psu: Optional[galois.FieldArray] = None
    client_set_write: Optional[galois.FieldArray] = None
    router_set_psu: Optional[galois.FieldArray] = None
    router_set_write: Optional[galois.FieldArray] = None
    recovered: dict[int, galois.FieldArray] = field(default_factory=dict)

    def client_w_psu(self, client_id: int) -> galois.FieldArray:
        return self.client_set_psu[self.crg_clients.index(client_id)]

    def client_w_write(self, client_id: int) -> galois.FieldArray:
        return self.client_set_write[self.crg_clients.index(client_id)]

    def router_w_psu(self, group: int) -> galois.FieldArray:
        return self.router_set_psu[self.crg_groups.index(group)]

    def router_w_write(self, group: int) -> galois.FieldArray:
        return self.router_set_write[self.crg_groups.index(group)]


@dataclass
class DatabaseState:
    """Coded shards and plain server-side randomness of one database."""

    db_id: int
    coded_store: dict[int, list[CodedRow]]
    rhat_psu: galois.FieldArray
    rhat_write: galois.FieldArray
    union: Optional[frozenset[int]] = None
    late_answers: list = field(default_factory=list)

    def rows(self, k: int) -> list[CodedRow]:
        return self.coded_store[k]

    def symbol(self, k: int, instance: int, column: int) -> galois.FieldArray:
        return self.coded_store[k][instance].symbols[column]
