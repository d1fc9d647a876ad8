"""Phase logic of one distributed learning round.

Every function here is a pure transform: it reads client or database state
and received messages and returns new messages or a new state. Sequencing,
delivery and fault injection belong to the simulator.

Phases:
  CRG   databases hand clients zero-sum masks w and a common scalar c
  PSU   clients learn nothing, databases learn the union of desired submodels
  write clients download the union, upload masked increments, routers
        re-encode the aggregate so every database can commit new storage
  CRR   client pairs refresh the plain server-side randomness
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import replace
from functools import reduce
from typing import Iterable, Mapping, Optional, Sequence

import galois
import numpy as np

from src.exceptions.exceptions import (
    DecodingFailureError,
    InconsistentAnswerError,
    MissingCompensationError,
    MissingRandomnessError,
    MissingRouterAnswerError,
    MissingShareError,
    NoMajorityError,
    NotEnoughDatabasesError,
    NotEnoughHelpersError,
    UnknownDroppedClientError,
    WrongContributorCountError,
    ZeroContributionError,
)
from src.models.codec_model import CodedRow, InstanceSchedule, OmegaInstance
from src.models.message_model import MessageKind, Phase, PhaseMessage, client_endpoint, db_endpoint
from src.models.state_model import ClientState, DatabaseState
from src.service.codec_service import read_positions, reconstruct_from_symbols, repair_assemble, repair_share
from src.utils.field_linalg import as_ints, solve, vandermonde

logger = logging.getLogger(__name__)


def to_payload(values) -> list[int]:
    return [int(v) for v in as_ints(values).ravel()]


def _field(GF: type[galois.FieldArray], msg: PhaseMessage) -> galois.FieldArray:
    return GF(msg.payload)


# ---------------------------------------------------------------- CRG


def crg_zero_sum_set(contributions, expected_contributors: Optional[int] = None) -> galois.FieldArray:
    """Sum J+1 contributions position-wise and close the set so it sums to zero.

    `contributions` has shape (J+1, L-1, ...); the result has shape (L, ...).
    """
    GF = type(contributions)
    if expected_contributors is not None and contributions.shape[0] != expected_contributors:
        raise WrongContributorCountError(
            f"Expected {expected_contributors} contributions, got {contributions.shape[0]}"
        )
    q = GF.order
    partial = as_ints(contributions).sum(axis=0) % q
    closing = (-partial.sum(axis=0, keepdims=True)) % q
    return GF(np.concatenate([partial, closing]))


def crg_scalar_c(contributions, expected_contributors: Optional[int] = None) -> galois.FieldArray:
    """Product of J+1 nonzero contributions."""
    if expected_contributors is not None and len(contributions) != expected_contributors:
        raise WrongContributorCountError(
            f"Expected {expected_contributors} contributions, got {len(contributions)}"
        )
    if any(int(v) == 0 for v in contributions):
        raise ZeroContributionError("Multiplicative contributions must be nonzero")
    return reduce(lambda a, b: a * b, list(contributions))


def crg_broadcast(
    db_id: int,
    client_id: int,
    phase: Phase,
    block: int,
    client_rows: galois.FieldArray,
    router_rows: galois.FieldArray,
    position: int,
    full: bool,
    router: bool,
    c: Optional[galois.FieldArray] = None,
) -> PhaseMessage:
    """One contributor's share of a common-randomness set, cut to what the recipient may hold.

    Routers and the client closing the zero-sum set get every client row;
    everyone else only the row at its own position.
    """
    parts = []
    if c is not None:
        parts.append(to_payload(c))
    if full:
        parts.append(to_payload(client_rows))
    elif position < client_rows.shape[0]:
        parts.append(to_payload(client_rows[position]))
    if router:
        parts.append(to_payload(router_rows))
    return PhaseMessage(
        kind=MessageKind.CR_BROADCAST,
        phase=Phase.CRG,
        sender=db_endpoint(db_id),
        receiver=client_endpoint(client_id),
        payload=[v for part in parts for v in part],
        meta={"set": phase.value, "block": block, "position": position, "full": full, "router": router},
    )


def crg_unpack(
    GF: type[galois.FieldArray],
    payload: Sequence[int],
    client_shape: tuple[int, ...],
    router_shape: tuple[int, ...],
    position: int,
    full: bool,
    router: bool,
    with_c: bool,
) -> tuple[Optional[galois.FieldArray], Optional[galois.FieldArray], Optional[galois.FieldArray]]:
    """Inverse of crg_broadcast: (c, client rows, router rows); absent parts are None."""
    values = GF(list(payload))
    cursor = 0

    def take(shape):
        nonlocal cursor
        size = int(np.prod(shape))
        chunk = values[cursor : cursor + size].reshape(shape)
        cursor += size
        return chunk

    c = take((1,))[0] if with_c else None
    client_rows = None
    if full:
        client_rows = take(client_shape)
    elif position < client_shape[0]:
        client_rows = take(client_shape[1:])
    router_rows = take(router_shape) if router else None
    if cursor != values.size:
        raise InconsistentAnswerError(f"Common randomness broadcast has {values.size} symbols, expected {cursor}")
    return c, client_rows, router_rows


def replica_databases(group: int, responsive: Sequence[int], N: int, A: int) -> list[int]:
    """The group database followed by the next 2A responsive databases in cyclic order."""
    if A == 0:
        return [group]
    order = [(group - 1 + step) % N + 1 for step in range(1, N)]
    followers = [j for j in order if j in set(responsive)][: 2 * A]
    return [group] + followers


# ---------------------------------------------------------------- PSU


def psu_client_answer(client: ClientState, receiver_db: int) -> PhaseMessage:
    if client.c is None or client.w_psu is None:
        raise MissingRandomnessError(f"Client {client.client_id} holds no union-phase randomness")
    payload = client.c * (client.incidence + client.w_psu)
    return PhaseMessage(
        kind=MessageKind.AU1,
        phase=Phase.PSU,
        sender=client_endpoint(client.client_id),
        receiver=db_endpoint(receiver_db),
        payload=to_payload(payload),
        meta={"group": client.group},
    )


def psu_db_aggregate(db: DatabaseState, answers: Sequence[PhaseMessage], group: int, router: int) -> PhaseMessage:
    GF = type(db.rhat_psu)
    total = db.rhat_psu.copy()
    for answer in answers:
        total += _field(GF, answer)
    return PhaseMessage(
        kind=MessageKind.DU2,
        phase=Phase.PSU,
        sender=db_endpoint(db.db_id),
        receiver=client_endpoint(router),
        payload=to_payload(total),
        meta={"group": group, "contributors": sorted(int(a.sender[1:]) for a in answers)},
    )


def psu_route_answer(
    router: ClientState, du2_payload: galois.FieldArray, group: int, targets: Iterable[int]
) -> list[PhaseMessage]:
    if router.router_set_psu is None:
        raise MissingRandomnessError(f"Router {router.client_id} holds no router randomness")
    payload = to_payload(du2_payload + router.router_w_psu(group))
    return [
        PhaseMessage(
            kind=MessageKind.AU2,
            phase=Phase.PSU,
            sender=client_endpoint(router.client_id),
            receiver=db_endpoint(j),
            payload=payload,
            meta={"group": group},
        )
        for j in targets
    ]


def _held_client_w(router: ClientState, dropped: Iterable[int], attribute: str) -> list[galois.FieldArray]:
    held = getattr(router, attribute)
    values = []
    for i in sorted(dropped):
        if held is None or i not in router.crg_clients:
            raise UnknownDroppedClientError(f"Router {router.client_id} holds no randomness of client {i}")
        values.append(held[router.crg_clients.index(i)])
    return values


def dropout_compensation_psu(router: ClientState, answers: Sequence[PhaseMessage], dropped: Iterable[int]) -> list[PhaseMessage]:
    """Append c * sum of the dropped clients' w to the router's broadcast."""
    dropped = sorted(dropped)
    if not dropped:
        return list(answers)
    GF = type(router.c)
    missing = _held_client_w(router, dropped, "client_set_psu")
    correction = router.c * reduce(lambda a, b: a + b, missing)
    adjusted = []
    for answer in answers:
        payload = to_payload(_field(GF, answer) + correction)
        meta = {**answer.meta, "compensated": dropped}
        adjusted.append(answer.model_copy(update={"payload": payload, "meta": meta}))
    logger.debug("Router %d compensates dropped clients %s", router.client_id, dropped)
    return adjusted


def _covered_groups(answers: Sequence[PhaseMessage], compensations: Sequence[PhaseMessage]) -> set[int]:
    covered = {a.meta["group"] for a in answers}
    for comp in compensations:
        covered.update(comp.meta.get("groups", []))
    return covered


def psu_decode_union(
    db: DatabaseState,
    answers: Sequence[PhaseMessage],
    expected_groups: Iterable[int],
    compensations: Sequence[PhaseMessage] = (),
) -> frozenset[int]:
    """k is in the union iff sum(answers) - n * Rhat_k is nonzero."""
    missing = set(expected_groups) - _covered_groups(answers, compensations)
    if missing:
        raise MissingRouterAnswerError(f"Database {db.db_id} misses router answers of groups {sorted(missing)}")
    GF = type(db.rhat_psu)
    total = GF.Zeros(db.rhat_psu.shape)
    for msg in list(answers) + list(compensations):
        total += _field(GF, msg)
    total -= len(answers) * db.rhat_psu
    return frozenset(k + 1 for k in range(total.size) if int(total[k]) != 0)


# ---------------------------------------------------------------- write


def _union_rows(union: Iterable[int]) -> list[int]:
    return [k - 1 for k in sorted(union)]


def masked_projection(
    values: galois.FieldArray, schedule: InstanceSchedule, psi_row: galois.FieldArray
) -> galois.FieldArray:
    """psi_row applied to a message-only Omega per instance: shape (n_inst, D)."""
    GF = type(values)
    out = GF.Zeros((len(schedule), schedule.D))
    for inst, layout in enumerate(schedule.layouts):
        omega = OmegaInstance(layout, values[list(schedule.positions(inst))], GF.Zeros(layout.R)).matrix()
        out[inst] = psi_row @ omega
    return out


def write_read_positions(
    schedule: InstanceSchedule, union: Iterable[int], A: int, live_dbs: Sequence[int]
) -> dict[int, list[tuple[int, int, int]]]:
    """(submodel, instance, column) requests per database.

    Without adversaries each instance is read column-wise from the first D
    live databases; with A > 0 the same columns are read from D+2A databases.
    """
    union = sorted(union)
    if not union:
        return {}
    D = schedule.D
    needed = D + 2 * A
    dbs = sorted(live_dbs)[:needed]
    if len(dbs) < needed:
        raise NotEnoughDatabasesError(f"Need {needed} live databases, got {len(live_dbs)}")
    requests: dict[int, list[tuple[int, int, int]]] = {db: [] for db in dbs}
    for k in union:
        for inst, layout in enumerate(schedule.layouts):
            if A == 0:
                for db, column in read_positions(layout, dbs):
                    requests[db].append((k, inst, column))
            else:
                for db in dbs:
                    requests[db].extend((k, inst, column) for column in range(layout.columns_needed))
    return {db: positions for db, positions in requests.items() if positions}


def write_db_respond(db: DatabaseState, client_id: int, positions: Sequence[tuple[int, int, int]]) -> PhaseMessage:
    GF = type(db.rhat_psu)
    symbols = GF([int(db.symbol(k, inst, col)) for k, inst, col in positions])
    return PhaseMessage(
        kind=MessageKind.DW1RESP,
        phase=Phase.WRITE,
        sender=db_endpoint(db.db_id),
        receiver=client_endpoint(client_id),
        payload=to_payload(symbols),
        meta={"positions": [list(p) for p in positions]},
    )


def recover_union_models(
    responses: Mapping[int, PhaseMessage],
    schedule: InstanceSchedule,
    union: Iterable[int],
    psi: galois.FieldArray,
    A: int = 0,
) -> dict[int, galois.FieldArray]:
    """Decode every submodel of the union from DW1 responses keyed by database."""
    GF = type(psi)
    symbols: dict[tuple[int, int], dict[tuple[int, int], int]] = {}
    for db, msg in responses.items():
        for (k, inst, col), value in zip(msg.meta["positions"], msg.payload):
            symbols.setdefault((k, inst), {})[(db, col)] = value
    dbs = sorted(responses)
    models = {}
    for k in sorted(union):
        model = GF.Zeros(schedule.L_stored)
        for inst, layout in enumerate(schedule.layouts):
            seen = symbols.get((k, inst), {})
            if A == 0:
                messages = reconstruct_from_symbols(seen, layout, psi, dbs).messages
            else:
                messages = _decode_instance_rs(seen, layout, psi, dbs, A)
            model[list(schedule.positions(inst))] = messages
        models[k] = model
    return models


def _decode_instance_rs(seen, layout, psi, dbs, A) -> galois.FieldArray:
    GF = type(psi)
    D = layout.D
    omega = GF.Zeros((D, D))
    xs = [int(psi[db - 1, 1]) for db in dbs]
    for col in range(layout.columns_needed):
        ys = [int(seen[(db, col)]) for db in dbs]
        omega[:, col] = adversary_decode_rs(GF, xs, ys, D, A)
    messages = GF.Zeros(layout.B)
    for r, c, index in layout.message_cells():
        messages[index] = omega[max(r, c), min(r, c)]
    return messages


def write_client_answer(client: ClientState, union: Iterable[int], receiver_db: Optional[int] = None) -> PhaseMessage:
    if client.w_write is None:
        raise MissingRandomnessError(f"Client {client.client_id} holds no write-phase randomness")
    rows = _union_rows(union)
    payload = client.increments[rows] + client.w_write[rows]
    return PhaseMessage(
        kind=MessageKind.AW1,
        phase=Phase.WRITE,
        sender=client_endpoint(client.client_id),
        receiver=db_endpoint(receiver_db if receiver_db is not None else client.group),
        payload=to_payload(payload),
        meta={"group": client.group},
    )


def write_db_aggregate(
    db: DatabaseState, answers: Sequence[PhaseMessage], union: Iterable[int], group: int, router: int
) -> PhaseMessage:
    GF = type(db.rhat_write)
    total = db.rhat_write[_union_rows(union)].copy()
    for answer in answers:
        total += _field(GF, answer).reshape(total.shape)
    return PhaseMessage(
        kind=MessageKind.DW2,
        phase=Phase.WRITE,
        sender=db_endpoint(db.db_id),
        receiver=client_endpoint(router),
        payload=to_payload(total),
        meta={"group": group, "contributors": sorted(int(a.sender[1:]) for a in answers)},
    )


def write_route_answer(
    router: ClientState,
    dw2_payload: galois.FieldArray,
    schedule: InstanceSchedule,
    union: Iterable[int],
    psi: galois.FieldArray,
    targets: Iterable[int],
    embed: bool,
    rng: np.random.Generator,
    group: Optional[int] = None,
) -> dict[int, PhaseMessage]:
    """Re-encode the group aggregate for every target database.

    Message cells carry aggregate + Rhat (plus the recovered model when this
    router embeds it); randomness cells are fresh draws shared by all
    targets; all-message columns get the router's zero-sum mask.
    """
    group = router.group if group is None else group
    if router.router_set_write is None:
        raise MissingRandomnessError(f"Router {router.client_id} holds no write-phase router randomness")
    union = sorted(union)
    if embed and any(k not in router.recovered for k in union):
        raise MissingRandomnessError(f"Router {router.client_id} has not recovered the union models")
    GF = type(dw2_payload)
    aggregate = dw2_payload.reshape((len(union), schedule.L_stored))
    router_w = router.router_w_write(group)
    targets = list(targets)
    encoded = {j: GF.Zeros((len(union), len(schedule), schedule.D)) for j in targets}
    for kk, k in enumerate(union):
        values = aggregate[kk] + router.recovered[k] if embed else aggregate[kk]
        for inst, layout in enumerate(schedule.layouts):
            randomness = GF(rng.integers(0, GF.order, size=layout.R))
            omega = OmegaInstance(layout, values[list(schedule.positions(inst))], randomness).matrix()
            mask_columns = list(layout.all_message_columns())
            for j in targets:
                row = psi[j - 1] @ omega
                if mask_columns:
                    row[mask_columns] += router_w[k - 1, inst, mask_columns]
                encoded[j][kk, inst] = row
    return {
        j: PhaseMessage(
            kind=MessageKind.AW2,
            phase=Phase.WRITE,
            sender=client_endpoint(router.client_id),
            receiver=db_endpoint(j),
            payload=to_payload(encoded[j]),
            meta={"group": group, "target": j, "embed": embed},
        )
        for j in targets
    }


def dropout_compensation_write(
    router: ClientState,
    dropped: Iterable[int],
    schedule: InstanceSchedule,
    union: Iterable[int],
    psi: galois.FieldArray,
    target: int,
) -> galois.FieldArray:
    """beta per (k, instance, column): psi_target applied to the dropped clients' masks."""
    GF = type(psi)
    union = sorted(union)
    dropped = sorted(dropped)
    beta = GF.Zeros((len(union), len(schedule), schedule.D))
    if not dropped:
        return beta
    missing = _held_client_w(router, dropped, "client_set_write")
    total = reduce(lambda a, b: a + b, missing)
    for kk, k in enumerate(union):
        beta[kk] = masked_projection(total[k - 1], schedule, psi[target - 1])
    return beta


def write_beta_answer(
    router: ClientState,
    dropped: Iterable[int],
    schedule: InstanceSchedule,
    union: Iterable[int],
    psi: galois.FieldArray,
    target: int,
) -> PhaseMessage:
    dropped = sorted(dropped)
    beta = dropout_compensation_write(router, dropped, schedule, union, psi, target)
    return PhaseMessage(
        kind=MessageKind.AW2,
        phase=Phase.WRITE,
        sender=client_endpoint(router.client_id),
        receiver=db_endpoint(target),
        payload=to_payload(beta),
        meta={"role": "beta", "group": router.group, "groups": [], "clients": dropped, "target": target},
        remedy=True,
    )


def db_dropout_compensation(
    router: ClientState,
    missing_groups: Mapping[int, Sequence[int]],
    target: int,
    phase: Phase,
    schedule: Optional[InstanceSchedule] = None,
    union: Iterable[int] = (),
    psi: Optional[galois.FieldArray] = None,
    orphans: Iterable[int] = (),
) -> PhaseMessage:
    """What a router supplies for groups whose database never answered.

    The union phase gets c * sum of the groups' client masks plus the
    groups' router masks; the write phase gets the matching beta plus the
    router masks of all-message columns. Orphans are clients holding masks
    whose whole group went absent, so no router mask exists for them.
    """
    groups = sorted(missing_groups)
    clients = sorted({i for g in groups for i in missing_groups[g]} | set(orphans))
    for g in groups:
        if g not in router.crg_groups:
            raise MissingCompensationError(f"Router {router.client_id} holds no router randomness of group {g}")
    if phase is Phase.PSU:
        if router.router_set_psu is None or router.c is None:
            raise MissingCompensationError(f"Router {router.client_id} holds no union-phase sets")
        GF = type(router.c)
        total = GF.Zeros(router.router_set_psu.shape[1])
        if clients:
            try:
                total += router.c * reduce(lambda a, b: a + b, _held_client_w(router, clients, "client_set_psu"))
            except UnknownDroppedClientError as e:
                raise MissingCompensationError(str(e))
        for g in groups:
            total += router.router_w_psu(g)
        kind = MessageKind.AU2
    else:
        if router.router_set_write is None or schedule is None or psi is None:
            raise MissingCompensationError(f"Router {router.client_id} holds no write-phase sets")
        try:
            total = dropout_compensation_write(router, clients, schedule, union, psi, target)
        except UnknownDroppedClientError as e:
            raise MissingCompensationError(str(e))
        for kk, k in enumerate(sorted(union)):
            for inst, layout in enumerate(schedule.layouts):
                columns = list(layout.all_message_columns())
                if not columns:
                    continue
                for g in groups:
                    total[kk, inst, columns] += router.router_w_write(g)[k - 1, inst, columns]
        kind = MessageKind.AW2
    return PhaseMessage(
        kind=kind,
        phase=phase,
        sender=client_endpoint(router.client_id),
        receiver=db_endpoint(target),
        payload=to_payload(total),
        meta={"role": "db-compensation", "groups": groups, "clients": clients, "target": target},
        remedy=True,
    )


def write_rhat_correction(
    db: DatabaseState, target: int, n_routers: int, union: Iterable[int], schedule: InstanceSchedule, psi: galois.FieldArray
) -> PhaseMessage:
    """n * psi_target applied to Rhat, for a replacement that holds no Rhat yet."""
    correction = _rhat_term(db, n_routers, union, schedule, psi[target - 1])
    return PhaseMessage(
        kind=MessageKind.REPAIR_SHARE,
        phase=Phase.REPAIR,
        sender=db_endpoint(db.db_id),
        receiver=db_endpoint(target),
        payload=to_payload(correction),
        meta={"role": "rhat-correction", "target": target},
    )


def _rhat_term(db, n_routers, union, schedule, psi_row) -> galois.FieldArray:
    GF = type(db.rhat_write)
    union = sorted(union)
    term = GF.Zeros((len(union), len(schedule), schedule.D))
    for kk, k in enumerate(union):
        term[kk] = n_routers * masked_projection(db.rhat_write[k - 1], schedule, psi_row)
    return term


def write_commit_storage(
    db: DatabaseState,
    answers: Sequence[PhaseMessage],
    union: Iterable[int],
    schedule: InstanceSchedule,
    psi: galois.FieldArray,
    expected_groups: Iterable[int],
    compensations: Sequence[PhaseMessage] = (),
    rhat_correction: Optional[galois.FieldArray] = None,
) -> DatabaseState:
    """Sum router answers, remove the known Rhat terms and store the new rows."""
    missing = set(expected_groups) - _covered_groups(answers, compensations)
    if missing:
        raise MissingRouterAnswerError(f"Database {db.db_id} misses write answers of groups {sorted(missing)}")
    union = sorted(union)
    GF = type(psi)
    shape = (len(union), len(schedule), schedule.D)
    total = GF.Zeros(shape)
    for msg in list(answers) + list(compensations):
        if msg.length != int(np.prod(shape)):
            raise InconsistentAnswerError(
                f"{msg.kind.value} from {msg.sender} has {msg.length} symbols, expected {int(np.prod(shape))}"
            )
        total += _field(GF, msg).reshape(shape)
    if rhat_correction is None:
        rhat_correction = _rhat_term(db, len(answers), union, schedule, psi[db.db_id - 1])
    total -= rhat_correction.reshape(shape)

    store = dict(db.coded_store)
    for kk, k in enumerate(union):
        store[k] = [
            CodedRow(db_index=db.db_id, instance_id=inst, symbols=total[kk, inst].copy())
            for inst in range(len(schedule))
        ]
    return replace(db, coded_store=store, union=frozenset(union))


# ---------------------------------------------------------------- CRR


def crr_refresh(share1: Optional[galois.FieldArray], share2: Optional[galois.FieldArray]) -> galois.FieldArray:
    if share1 is None or share2 is None:
        raise MissingShareError("Server randomness refresh needs shares from both clients of a pair")
    return share1 + share2


def crr_pairs(active_clients: Sequence[int]) -> list[tuple[int, int]]:
    """Clients (2t-1, 2t) of the sorted active population form pair t."""
    ordered = sorted(active_clients)
    return [(ordered[2 * t], ordered[2 * t + 1]) for t in range(len(ordered) // 2)]


# ---------------------------------------------------------------- repair


def repair_helper_share(
    db: DatabaseState, failed: int, submodels: Iterable[int], psi: galois.FieldArray, router: int
) -> PhaseMessage:
    """One symbol per instance of every submodel the replacement must rebuild."""
    submodels = sorted(submodels)
    GF = type(psi)
    shares = GF([int(repair_share(row, psi, failed)) for k in submodels for row in db.rows(k)])
    return PhaseMessage(
        kind=MessageKind.REPAIR_SHARE,
        phase=Phase.REPAIR,
        sender=db_endpoint(db.db_id),
        receiver=client_endpoint(router),
        payload=to_payload(shares),
        meta={"role": "helper", "helper": db.db_id, "submodels": submodels, "target": failed},
    )


def route_repair_share(router: ClientState, share: PhaseMessage, failed: int) -> PhaseMessage:
    return share.model_copy(
        update={"sender": client_endpoint(router.client_id), "receiver": db_endpoint(failed)}
    )


def repair_failed_database(
    failed: int,
    union: Iterable[int],
    shares: Sequence[PhaseMessage],
    committed: DatabaseState,
    schedule: InstanceSchedule,
    psi: galois.FieldArray,
    K: int,
    A: int = 0,
) -> DatabaseState:
    """Complete a replacement's store: union rows from its commit, the rest from helper shares."""
    union = set(union)
    rebuild = [k for k in range(1, K + 1) if k not in union]
    store = {k: committed.coded_store[k] for k in union}
    if rebuild:
        D = schedule.D
        needed = D + 2 * A
        by_helper = {msg.meta["helper"]: msg for msg in shares}
        helpers = sorted(by_helper)[:needed]
        if len(helpers) < needed:
            raise NotEnoughHelpersError(f"Repair of database {failed} needs {needed} helpers, got {len(by_helper)}")
        GF = type(psi)
        n_inst = len(schedule)
        for position, k in enumerate(rebuild):
            rows = []
            for inst in range(n_inst):
                offset = position * n_inst + inst
                values = {h: GF(by_helper[h].payload[offset]) for h in helpers}
                if A == 0:
                    rows.append(repair_assemble(values, psi, failed, instance_id=inst))
                else:
                    xs = [int(psi[h - 1, 1]) for h in helpers]
                    projection = adversary_decode_rs(GF, xs, [int(values[h]) for h in helpers], D, A)
                    rows.append(CodedRow(db_index=failed, instance_id=inst, symbols=projection))
            store[k] = rows
    logger.info("Replacement database %d rebuilt %d submodels from helpers", failed, len(rebuild))
    return replace(committed, db_id=failed, coded_store=dict(sorted(store.items())))


# ---------------------------------------------------------------- adversary


def adversary_decode_repetition(copies: Sequence, A: int) -> galois.FieldArray:
    """Per-symbol majority over 2A+1 copies."""
    if len(copies) != 2 * A + 1:
        raise NoMajorityError(f"Expected {2 * A + 1} copies, got {len(copies)}")
    GF = type(copies[0]) if isinstance(copies[0], galois.FieldArray) else None
    matrix = np.vstack([as_ints(c) for c in copies])
    decoded = []
    for column in matrix.T:
        value, count = Counter(column.tolist()).most_common(1)[0]
        if count < A + 1:
            raise NoMajorityError(f"No value reaches {A + 1} of {2 * A + 1} copies")
        decoded.append(value)
    return GF(decoded) if GF is not None else np.asarray(decoded, dtype=np.int64)


def adversary_decode_rs(
    GF: type[galois.FieldArray], xs: Sequence[int], ys: Sequence[int], D: int, A: int
) -> galois.FieldArray:
    """Berlekamp-Welch: coefficients (ascending) of the degree < D polynomial behind D+2A evaluations."""
    n = len(xs)
    if n < D + 2 * A:
        raise DecodingFailureError(f"Need {D + 2 * A} evaluations, got {n}")
    if A == 0:
        return solve(vandermonde(GF, xs[:D], D), GF([int(y) % GF.order for y in ys[:D]]))

    q = GF.order
    e = A
    rows = []
    for x, y in zip(xs, ys):
        powers = [pow(int(x), t, q) for t in range(e + D)]
        q_part = powers
        e_part = [(-int(y) * pow(int(x), t, q)) % q for t in range(e + 1)]
        rows.append(q_part + e_part)
    basis = GF(rows).null_space()
    if basis.shape[0] == 0:
        raise DecodingFailureError("Key equation has no nonzero solution")
    solution = basis[0]
    Q = galois.Poly(solution[: e + D][::-1])
    E = galois.Poly(solution[e + D :][::-1])
    if E == galois.Poly.Zero(GF):
        raise DecodingFailureError("Error locator vanished")
    P, remainder = divmod(Q, E)
    if remainder != galois.Poly.Zero(GF) or P.degree >= D:
        raise DecodingFailureError(f"More than {A} corrupted evaluations")
    coefficients = GF.Zeros(D)
    ascending = P.coeffs[::-1]
    coefficients[: ascending.size] = ascending
    agreeing = int(np.count_nonzero(P(GF(list(xs))) == GF([int(y) % q for y in ys])))
    if agreeing < n - A:
        raise DecodingFailureError(f"Only {agreeing} of {n} evaluations agree with the decoded polynomial")
    return coefficients
