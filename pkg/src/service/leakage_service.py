"""Rank-based information measurement over a finished round.

Every symbol an observer sees is an affine function of independent uniform
variables (models, storage randomness, router randomness, plain server
randomness, common-randomness contributions, and optionally increments).
Writing each symbol as a row over those variables, the information the
observer holds about a target block of variables is
rank[A|B] - rank[B] in q-ary units, A being the target columns.

Union-phase traffic only involves the union-phase masks, incidence vectors
and Rhat_k; those variables never meet the write-phase ones, so those rows
add the same rank to both terms and are left out.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Hashable, Iterable, Optional

import numpy as np

from src.models.codec_model import InstanceSchedule
from src.models.message_model import MessageKind, PhaseMessage, db_endpoint, endpoint_id, is_db
from src.utils.field_linalg import get_field, rank

logger = logging.getLogger(__name__)


@dataclass
class RoundRecord:
    """Structure of a finished round, enough to rebuild every symbol as a linear form."""

    q: int
    K: int
    psis: list[int]
    schedule: InstanceSchedule
    union: list[int]
    crg_clients: list[int]
    crg_groups: list[int]
    routers: dict[int, int]
    delivering_groups: list[int]
    embedder_group: Optional[int]
    write_contributors: dict[int, list[int]]
    crg_blocks: list[list[int]]
    failed_db: Optional[int]
    start_dbs: list[int]
    end_dbs: list[int]
    transcript: list[tuple[int, PhaseMessage]] = field(default_factory=list)

    def psi_pow(self, db: int, power: int) -> int:
        return pow(self.psis[db - 1], power, self.q)


class FormBuilder:
    """Sparse rows over named variables, reduced mod q."""

    def __init__(self, q: int):
        self.q = q
        self.columns: dict[Hashable, int] = {}
        self.rows: list[dict[int, int]] = []

    def add(self, terms: dict[Hashable, int]) -> None:
        row: dict[int, int] = defaultdict(int)
        for key, coeff in terms.items():
            column = self.columns.setdefault(key, len(self.columns))
            row[column] = (row[column] + coeff) % self.q
        row = {c: v for c, v in row.items() if v}
        if row:
            self.rows.append(row)

    def information(self, is_target: Callable[[Hashable], bool], conditioning: Iterable[dict] = ()) -> int:
        """rank[A|B] - rank[B], minus what the conditioning rows alone carry."""
        conditioning = list(conditioning)
        for terms in conditioning:
            for key in terms:
                self.columns.setdefault(key, len(self.columns))
        if not self.rows and not conditioning:
            return 0
        GF = get_field(self.q)
        width = len(self.columns)
        target = np.zeros(width, dtype=bool)
        for key, column in self.columns.items():
            target[column] = is_target(key)

        def dense(rows):
            matrix = np.zeros((len(rows), width), dtype=np.int64)
            for r, row in enumerate(rows):
                for c, v in row.items():
                    matrix[r, c] = v
            return matrix

        cond_rows = []
        for terms in conditioning:
            row: dict[int, int] = defaultdict(int)
            for key, coeff in terms.items():
                row[self.columns[key]] = (row[self.columns[key]] + coeff) % self.q
            cond_rows.append(row)
        full = dense(self.rows + cond_rows)
        joint = rank(GF(full))
        rest = rank(GF(full[:, ~target]))
        given = rank(GF(dense(cond_rows)[:, target])) if cond_rows else 0
        return joint - rest - given


def _add(terms: dict, key, coeff: int) -> None:
    terms[key] = terms.get(key, 0) + coeff


class RoundForms:
    """Linear forms of the symbols of one round."""

    def __init__(self, record: RoundRecord, increments_as_variables: bool):
        self.r = record
        self.with_increments = increments_as_variables
        self.n_clients = len(record.crg_clients)
        self.n_groups = len(record.crg_groups)
        self.blocks = range(len(record.crg_blocks))
        # increments of clients whose update never reaches the model are treated as constants
        self.contributors = {i for g in record.delivering_groups for i in record.write_contributors.get(g, [])}

    # --- common randomness expansions

    def client_mask(self, terms: dict, client: int, k: int, s: int, coeff: int) -> None:
        pos = self.r.crg_clients.index(client)
        if pos < self.n_clients - 1:
            for b in self.blocks:
                _add(terms, ("cc", b, k, s, pos), coeff)
        else:
            for b in self.blocks:
                for p in range(self.n_clients - 1):
                    _add(terms, ("cc", b, k, s, p), -coeff)

    def router_mask(self, terms: dict, group: int, k: int, inst: int, column: int, coeff: int) -> None:
        pos = self.r.crg_groups.index(group)
        if pos < self.n_groups - 1:
            for b in self.blocks:
                _add(terms, ("rc", b, k, inst, column, pos), coeff)
        else:
            for b in self.blocks:
                for p in range(self.n_groups - 1):
                    _add(terms, ("rc", b, k, inst, column, p), -coeff)

    def increment(self, terms: dict, client: int, k: int, s: int, coeff: int) -> None:
        if self.with_increments and client in self.contributors:
            _add(terms, ("delta", client, k, s), coeff)

    # --- storage

    def old_symbol(self, db: int, k: int, inst: int, column: int, coeff: int = 1, terms=None) -> dict:
        terms = {} if terms is None else terms
        layout = self.r.schedule.layouts[inst]
        offset = self.r.schedule.offsets[inst]
        for row in range(layout.D):
            cell = layout.cell(row, column)
            c = coeff * self.r.psi_pow(db, row)
            if cell.is_message:
                _add(terms, ("m", k, offset + cell.index), c)
            else:
                _add(terms, ("rold", k, inst, cell.index), c)
        return terms

    def new_symbol(self, db: int, k: int, inst: int, column: int) -> dict:
        terms: dict = {}
        layout = self.r.schedule.layouts[inst]
        offset = self.r.schedule.offsets[inst]
        contributors = [i for g in self.r.delivering_groups for i in self.r.write_contributors.get(g, [])]
        for row in range(layout.D):
            cell = layout.cell(row, column)
            c = self.r.psi_pow(db, row)
            if cell.is_message:
                s = offset + cell.index
                _add(terms, ("m", k, s), c)
                for i in contributors:
                    self.increment(terms, i, k, s, c)
            else:
                for g in self.r.delivering_groups:
                    _add(terms, ("rnew", k, inst, g, cell.index), c)
        return terms

    def storage_rows(self, builder: FormBuilder, db: int, new: bool) -> None:
        for k in range(1, self.r.K + 1):
            for inst, layout in enumerate(self.r.schedule.layouts):
                for column in range(layout.D):
                    if new and k in self.r.union:
                        builder.add(self.new_symbol(db, k, inst, column))
                    else:
                        builder.add(self.old_symbol(db, k, inst, column))

    # --- write-phase messages

    def masked_upload(self, terms: dict, clients: Iterable[int], k: int, s: int, coeff: int = 1) -> None:
        for i in clients:
            self.increment(terms, i, k, s, coeff)
            self.client_mask(terms, i, k, s, coeff)

    def aw1_rows(self, builder: FormBuilder, msg: PhaseMessage) -> None:
        client = endpoint_id(msg.sender)
        for k in self.r.union:
            for s in range(self.r.schedule.L_stored):
                terms: dict = {}
                self.masked_upload(terms, [client], k, s)
                builder.add(terms)

    def dw2_rows(self, builder: FormBuilder, msg: PhaseMessage) -> None:
        contributors = msg.meta.get("contributors", [])
        for k in self.r.union:
            for s in range(self.r.schedule.L_stored):
                terms: dict = {("rhat", k, s): 1}
                self.masked_upload(terms, contributors, k, s)
                builder.add(terms)

    def _projection(self, target: int, k: int, inst: int, column: int, message_terms) -> dict:
        """psi_target applied to column `column` of an Omega whose message cells are message_terms(s)."""
        terms: dict = {}
        layout = self.r.schedule.layouts[inst]
        offset = self.r.schedule.offsets[inst]
        for row in range(layout.D):
            cell = layout.cell(row, column)
            if cell.is_message:
                c = self.r.psi_pow(target, row)
                for key, coeff in message_terms(offset + cell.index).items():
                    _add(terms, key, c * coeff)
        return terms

    def aw2_rows(self, builder: FormBuilder, msg: PhaseMessage) -> None:
        group = msg.meta["group"]
        target = msg.meta["target"]
        contributors = self.r.write_contributors.get(group, [])
        embed = msg.meta.get("embed", False)
        for k in self.r.union:

            def cell_terms(s, k=k):
                terms: dict = {("rhat", k, s): 1}
                if embed:
                    _add(terms, ("m", k, s), 1)
                self.masked_upload(terms, contributors, k, s)
                return terms

            for inst, layout in enumerate(self.r.schedule.layouts):
                masked = layout.all_message_columns()
                for column in range(layout.D):
                    terms = self._projection(target, k, inst, column, cell_terms)
                    for row in range(layout.D):
                        cell = layout.cell(row, column)
                        if not cell.is_message:
                            _add(terms, ("rnew", k, inst, group, cell.index), self.r.psi_pow(target, row))
                    if column in masked:
                        self.router_mask(terms, group, k, inst, column, 1)
                    builder.add(terms)

    def compensation_rows(self, builder: FormBuilder, msg: PhaseMessage) -> None:
        target = msg.meta["target"]
        clients = msg.meta.get("clients", [])
        groups = msg.meta.get("groups", [])
        for k in self.r.union:

            def cell_terms(s, k=k):
                terms: dict = {}
                for i in clients:
                    self.client_mask(terms, i, k, s, 1)
                return terms

            for inst, layout in enumerate(self.r.schedule.layouts):
                masked = layout.all_message_columns()
                for column in range(layout.D):
                    terms = self._projection(target, k, inst, column, cell_terms)
                    if column in masked:
                        for g in groups:
                            self.router_mask(terms, g, k, inst, column, 1)
                    builder.add(terms)

    def rhat_correction_rows(self, builder: FormBuilder, msg: PhaseMessage) -> None:
        target = msg.meta["target"]
        n = len(self.r.delivering_groups)
        for k in self.r.union:
            for inst, layout in enumerate(self.r.schedule.layouts):
                for column in range(layout.D):
                    builder.add(self._projection(target, k, inst, column, lambda s, k=k: {("rhat", k, s): n}))

    def helper_share_rows(self, builder: FormBuilder, msg: PhaseMessage) -> None:
        helper = msg.meta["helper"]
        failed = msg.meta["target"]
        D = self.r.schedule.D
        for k in msg.meta["submodels"]:
            for inst in range(len(self.r.schedule)):
                terms: dict = {}
                for column in range(D):
                    self.old_symbol(helper, k, inst, column, coeff=self.r.psi_pow(failed, column), terms=terms)
                builder.add(terms)

    def rhat_rows(self, builder: FormBuilder) -> None:
        for k in self.r.union:
            for s in range(self.r.schedule.L_stored):
                builder.add({("rhat", k, s): 1})

    def contribution_rows(self, builder: FormBuilder, blocks: Iterable[int]) -> None:
        for b in blocks:
            for k in self.r.union:
                for s in range(self.r.schedule.L_stored):
                    for p in range(self.n_clients - 1):
                        builder.add({("cc", b, k, s, p): 1})
                for inst, layout in enumerate(self.r.schedule.layouts):
                    for column in layout.all_message_columns():
                        for p in range(self.n_groups - 1):
                            builder.add({("rc", b, k, inst, column, p): 1})

    def router_knowledge_rows(self, builder: FormBuilder) -> None:
        """Routing clients hold every client mask and every router mask."""
        for k in self.r.union:
            for s in range(self.r.schedule.L_stored):
                for i in self.r.crg_clients:
                    terms: dict = {}
                    self.client_mask(terms, i, k, s, 1)
                    builder.add(terms)
            for inst, layout in enumerate(self.r.schedule.layouts):
                for column in layout.all_message_columns():
                    for g in self.r.crg_groups:
                        terms = {}
                        self.router_mask(terms, g, k, inst, column, 1)
                        builder.add(terms)

    def dw1_rows(self, builder: FormBuilder, msg: PhaseMessage) -> None:
        db = endpoint_id(msg.sender)
        for k, inst, column in msg.meta.get("positions", []):
            builder.add(self.old_symbol(db, k, inst, column))


def database_view(record: RoundRecord, observed: Iterable[int], increments_as_variables: bool) -> tuple[FormBuilder, RoundForms]:
    """Storage at start and end, plain randomness and all write-phase traffic of a set of databases."""
    observed = set(observed)
    forms = RoundForms(record, increments_as_variables)
    builder = FormBuilder(record.q)
    endpoints = {db_endpoint(j) for j in observed}

    for db in sorted(observed):
        if db in record.start_dbs:
            forms.storage_rows(builder, db, new=False)
        if db in record.end_dbs:
            forms.storage_rows(builder, db, new=True)
    if observed & set(record.start_dbs):
        forms.rhat_rows(builder)
    forms.contribution_rows(builder, [b for b, block in enumerate(record.crg_blocks) if observed & set(block)])

    for _, msg in record.transcript:
        inbound = msg.receiver in endpoints
        outbound = msg.sender in endpoints
        if not (inbound or outbound):
            continue
        role = msg.meta.get("role")
        if msg.kind == MessageKind.AW1 and inbound:
            forms.aw1_rows(builder, msg)
        elif msg.kind == MessageKind.DW2 and outbound:
            forms.dw2_rows(builder, msg)
        elif msg.kind == MessageKind.AW2 and inbound:
            if role in ("beta", "db-compensation"):
                forms.compensation_rows(builder, msg)
            else:
                forms.aw2_rows(builder, msg)
        elif msg.kind == MessageKind.REPAIR_SHARE and inbound:
            if role == "rhat-correction":
                forms.rhat_correction_rows(builder, msg)
            elif role == "helper" and not is_db(msg.sender):
                forms.helper_share_rows(builder, msg)
    return builder, forms


def measure_eavesdropper_leakage(record: RoundRecord, observed: Iterable[int]) -> Fraction:
    """Information about the stored models held by the observed databases, per stored model symbol."""
    observed = set(observed)
    total = record.K * record.schedule.L_stored
    if not observed:
        return Fraction(0)
    builder, _ = database_view(record, observed, increments_as_variables=False)
    leaked = builder.information(lambda key: key[0] == "m")
    logger.debug("Eavesdropper %s: %d of %d symbols", sorted(observed), leaked, total)
    return Fraction(leaked, total)


def measure_privacy(record: RoundRecord, colluding: Iterable[int]) -> int:
    """Information colluding databases hold about individual increments beyond their sum."""
    builder, _ = database_view(record, colluding, increments_as_variables=True)
    contributors = [i for g in record.delivering_groups for i in record.write_contributors.get(g, [])]
    conditioning = []
    for k in record.union:
        for s in range(record.schedule.L_stored):
            if contributors:
                conditioning.append({("delta", i, k, s): 1 for i in contributors})
    return builder.information(lambda key: key[0] == "delta", conditioning)


def measure_inter_client_privacy(record: RoundRecord, router: int) -> int:
    """Information a routing client holds about other clients' increments."""
    forms = RoundForms(record, increments_as_variables=True)
    builder = FormBuilder(record.q)
    endpoint = f"C{router}"
    forms.router_knowledge_rows(builder)
    for k in record.union:
        for s in range(record.schedule.L_stored):
            builder.add({("delta", router, k, s): 1})
    for _, msg in record.transcript:
        if msg.receiver != endpoint:
            continue
        if msg.kind == MessageKind.DW2:
            forms.dw2_rows(builder, msg)
        elif msg.kind == MessageKind.DW1RESP:
            forms.dw1_rows(builder, msg)
        elif msg.kind == MessageKind.REPAIR_SHARE and msg.meta.get("role") == "helper":
            forms.helper_share_rows(builder, msg)
    return builder.information(lambda key: key[0] == "delta" and key[1] != router)


def subsets(items: Iterable[int], size: int, limit: int) -> list[tuple[int, ...]]:
    chosen = []
    for subset in combinations(sorted(items), size):
        chosen.append(subset)
        if len(chosen) >= limit:
            break
    return chosen
