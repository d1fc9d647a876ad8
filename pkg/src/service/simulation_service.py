"""Deterministic single-process harness around the protocol phases.

A round runs CRG -> PSU -> CRG -> write -> repair -> CRR over a discrete-step
message bus. Faults are injected at the bus; remedies are engaged by the
harness the way the participants would engage them. Afterwards the round
is checked against a plaintext oracle and the rank-based privacy measures.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

import galois
import numpy as np

from src.config.settings import get_settings
from src.exceptions.exceptions import (
    DecodingFailureError,
    DimensionMismatchError,
    DuplicatePsiError,
    InconsistentAnswerError,
    InconsistentRowsError,
    InvalidModulusError,
    MissingCompensationError,
    MissingRandomnessError,
    MissingRouterAnswerError,
    MissingShareError,
    NoMajorityError,
    NotEnoughDatabasesError,
    NotEnoughHelpersError,
    NotEnoughRowsError,
    ProtocolAbortError,
    ScenarioInfeasibleError,
    SelfRepairError,
    SingularMatrixError,
    UnknownDroppedClientError,
    WrongContributorCountError,
    ZeroContributionError,
)
from src.models.codec_model import OmegaInstance
from src.models.message_model import (
    MessageKind,
    Phase,
    PhaseMessage,
    client_endpoint,
    db_endpoint,
    endpoint_id,
)
from src.models.params_model import FaultConfig, RoundInputs, SystemParams, canonical_fraction
from src.models.report_model import RoundReport, Verdicts
from src.models.state_model import ClientState, DatabaseState
from src.service.bus_service import FaultInjector, MessageBus
from src.service.codec_service import encode_instance, plan_time_sharing, reconstruct, schedule_instances
from src.service.cost_service import meter_costs
from src.service.leakage_service import (
    RoundRecord,
    measure_eavesdropper_leakage,
    measure_inter_client_privacy,
    measure_privacy,
    subsets,
)
from src.service.protocol_service import (
    adversary_decode_repetition,
    crg_broadcast,
    crg_scalar_c,
    crg_unpack,
    crg_zero_sum_set,
    crr_pairs,
    crr_refresh,
    db_dropout_compensation,
    dropout_compensation_psu,
    psu_client_answer,
    psu_db_aggregate,
    psu_decode_union,
    psu_route_answer,
    recover_union_models,
    repair_failed_database,
    repair_helper_share,
    replica_databases,
    route_repair_share,
    to_payload,
    write_beta_answer,
    write_client_answer,
    write_commit_storage,
    write_db_aggregate,
    write_db_respond,
    write_read_positions,
    write_rhat_correction,
    write_route_answer,
)
from src.utils.field_linalg import as_ints, get_field, vandermonde
from src.utils.randomness import RandomStreams

logger = logging.getLogger(__name__)
settings = get_settings()

PROTOCOL_ERRORS = (
    DecodingFailureError,
    DimensionMismatchError,
    InconsistentAnswerError,
    InconsistentRowsError,
    MissingCompensationError,
    MissingRandomnessError,
    MissingRouterAnswerError,
    MissingShareError,
    NoMajorityError,
    NotEnoughDatabasesError,
    NotEnoughHelpersError,
    NotEnoughRowsError,
    SelfRepairError,
    SingularMatrixError,
    UnknownDroppedClientError,
    WrongContributorCountError,
    ZeroContributionError,
)


@dataclass
class SimulationOptions:
    check_leakage: bool = True
    check_privacy: bool = True
    subset_limit: int = settings.EXHAUSTIVE_SUBSET_LIMIT


def check_feasibility(params: SystemParams, faults: Optional[FaultConfig] = None) -> None:
    """Reject parameter and fault combinations the protocol cannot serve."""
    N, D, E, J, A, q = params.N, params.D, params.E, params.J, params.A, params.q
    try:
        get_field(q)
    except InvalidModulusError as e:
        raise ScenarioInfeasibleError(str(e))
    if q <= max(params.C, N):
        raise ScenarioInfeasibleError(f"Field size q={q} must exceed max(C, N)={max(params.C, N)}")
    if not N > D > E >= 1:
        raise ScenarioInfeasibleError(f"Need N > D > E >= 1, got N={N}, D={D}, E={E}")
    if E > J:
        raise ScenarioInfeasibleError(f"Eavesdropped set E={E} must not exceed the collusion bound J={J}")
    reduced = [p % q for p in params.psi_values]
    if 0 in reduced or len(set(reduced)) != N:
        raise ScenarioInfeasibleError(f"Evaluation points must be distinct and nonzero mod {q}, got {params.psi_values}")
    if A > 0 and N < max(2 * A + D, (J + 1) * (2 * A + 1)):
        raise ScenarioInfeasibleError(f"A={A} adversaries need N >= max(2A+D, (J+1)(2A+1)), got N={N}")
    if any(not 1 <= j <= N for j in params.group_assignment.values()):
        raise ScenarioInfeasibleError("group_assignment points at a database outside 1..N")
    if params.leak > 1:
        raise ScenarioInfeasibleError(f"delta must lie in [0, 1], got {params.delta}")

    faults = faults or FaultConfig()
    for name in ("dropped_dbs", "eavesdropper_set", "adversary_set"):
        if any(not 1 <= j <= N for j in getattr(faults, name)):
            raise ScenarioInfeasibleError(f"{name} names a database outside 1..{N}")
    if faults.failed_db is not None and not 1 <= faults.failed_db <= N:
        raise ScenarioInfeasibleError(f"failed_db {faults.failed_db} outside 1..{N}")
    for name in ("dropped_clients", "late_clients"):
        if any(not 1 <= i <= params.C for i in getattr(faults, name)):
            raise ScenarioInfeasibleError(f"{name} names a client outside 1..{params.C}")
    if len(faults.adversary_set) > A:
        raise ScenarioInfeasibleError(f"{len(faults.adversary_set)} adversarial databases exceed A={A}")
    if faults.eavesdropper_set and len(faults.eavesdropper_set) != E:
        raise ScenarioInfeasibleError(f"Eavesdropper set must hold exactly E={E} databases")
    lost = set(faults.dropped_dbs) | ({faults.failed_db} if faults.failed_db is not None else set())
    responsive = N - len(lost)
    if responsive < D + 2 * A:
        raise ScenarioInfeasibleError(f"Only {responsive} responsive databases, need D+2A={D + 2 * A}")
    if responsive < (J + 1) * (2 * A + 1):
        raise ScenarioInfeasibleError(
            f"Only {responsive} responsive databases, common randomness needs (J+1)(2A+1)={(J + 1) * (2 * A + 1)}"
        )


class FslSimulator:
    """Owns database storage and the plaintext model across rounds."""

    def __init__(
        self,
        params: SystemParams,
        seed: int = 0,
        initial_model: Optional[Sequence[Sequence[int]]] = None,
        options: Optional[SimulationOptions] = None,
    ):
        check_feasibility(params)
        self.params = params
        self.seed = seed
        self.options = options or SimulationOptions()
        self.GF = get_field(params.q)
        try:
            self.psi = vandermonde(self.GF, params.psi_values, params.D)
        except DuplicatePsiError as e:
            raise ScenarioInfeasibleError(str(e))
        self.plan = plan_time_sharing(params.D, params.E, params.leak)
        self.schedule = schedule_instances(self.plan, params.L)
        self.streams = RandomStreams(seed, self.GF)
        self.round = 0
        self.model = self._initial_model(initial_model)
        self.dbs = self._initial_storage()
        self.last_transcript: list[str] = []
        self.last_record: Optional[RoundRecord] = None
        logger.info(
            "Simulator N=%d C=%d K=%d L=%d D=%d: plan counts (%d, %d), %d instances per submodel",
            params.N, params.C, params.K, params.L, params.D,
            self.plan.count_a, self.plan.count_b, len(self.schedule),
        )

    def _initial_model(self, initial_model) -> galois.FieldArray:
        K, L, Ls = self.params.K, self.params.L, self.schedule.L_stored
        model = self.streams.field("model", shape=(K, Ls))
        if initial_model is not None:
            given = np.asarray(initial_model, dtype=np.int64)
            if given.shape != (K, L):
                raise ScenarioInfeasibleError(f"Initial model must be {K} x {L}, got {given.shape}")
            model[:, :L] = self.GF(np.mod(given, self.params.q))
        return model

    def _initial_storage(self) -> dict[int, DatabaseState]:
        stores: dict[int, dict] = {j: {} for j in self.params.db_ids}
        for k in range(1, self.params.K + 1):
            for inst, layout in enumerate(self.schedule.layouts):
                values = self.model[k - 1][list(self.schedule.positions(inst))]
                randomness = self.streams.field("storage", k, inst, shape=layout.R)
                for row in encode_instance(OmegaInstance(layout, values, randomness), self.psi, instance_id=inst):
                    stores[row.db_index].setdefault(k, []).append(row)
        rhat_psu = self.streams.field("rhat-psu", shape=self.params.K)
        rhat_write = self.streams.field("rhat-write", shape=(self.params.K, self.schedule.L_stored))
        return {
            j: DatabaseState(db_id=j, coded_store=stores[j], rhat_psu=rhat_psu.copy(), rhat_write=rhat_write.copy())
            for j in self.params.db_ids
        }

    def run_round(self, inputs: RoundInputs, faults: Optional[FaultConfig] = None) -> RoundReport:
        faults = faults or FaultConfig()
        check_feasibility(self.params, faults)
        run = _RoundRun(self, inputs, faults)
        try:
            report = run.execute()
        except (ScenarioInfeasibleError, ProtocolAbortError):
            raise
        except PROTOCOL_ERRORS as e:
            raise ProtocolAbortError(f"Failed to complete round {self.round}: {str(e)}")
        self.dbs = run.end_dbs
        self.model = run.new_model
        self.last_transcript = run.bus.transcript_lines()
        self.last_record = run.record
        self.round += 1
        return report


class _RoundRun:
    """State of one round in flight."""

    def __init__(self, sim: FslSimulator, inputs: RoundInputs, faults: FaultConfig):
        self.sim = sim
        self.params = sim.params
        self.GF = sim.GF
        self.psi = sim.psi
        self.schedule = sim.schedule
        self.streams = sim.streams
        self.r = sim.round
        self.A = sim.params.A
        self.faults = faults
        self.bus = MessageBus(FaultInjector(faults, sim.params.q, self.streams.generator("faults", self.r)))
        self.events: list[str] = []
        self.failed = faults.failed_db
        self.dbs = {j: db for j, db in sim.dbs.items() if j != self.failed}
        self.replacement: Optional[DatabaseState] = None
        if self.failed is not None:
            self.replacement = DatabaseState(
                db_id=self.failed,
                coded_store={},
                rhat_psu=self.GF.Zeros(self.params.K),
                rhat_write=self.GF.Zeros((self.params.K, self.schedule.L_stored)),
            )
        self._read_inputs(inputs)

    # ------------------------------------------------------------ setup

    def _group(self, client_id: int) -> int:
        return self.params.group_assignment[client_id]

    def _read_inputs(self, inputs: RoundInputs) -> None:
        K, L, Ls = self.params.K, self.params.L, self.schedule.L_stored
        unknown = set(inputs.gammas) - set(self.params.client_ids)
        if unknown:
            raise ScenarioInfeasibleError(f"Desired sets given for unknown clients {sorted(unknown)}")
        self.gammas: dict[int, frozenset[int]] = {}
        self.increments: dict[int, galois.FieldArray] = {}
        for i in self.params.client_ids:
            gamma = frozenset(inputs.gammas.get(i, []))
            if any(not 1 <= k <= K for k in gamma):
                raise ScenarioInfeasibleError(f"Client {i} asks for a submodel outside 1..{K}")
            if inputs.increments is not None and i in inputs.increments:
                given = np.asarray(inputs.increments[i], dtype=np.int64)
                if given.shape != (K, L):
                    raise ScenarioInfeasibleError(f"Increments of client {i} must be {K} x {L}, got {given.shape}")
                raw = self.GF(np.mod(given, self.params.q))
            else:
                raw = self.streams.field("increments", self.r, i, shape=(K, L))
            full = self.GF.Zeros((K, Ls))
            full[:, :L] = raw
            for k in range(1, K + 1):
                if k not in gamma:
                    full[k - 1] = 0
            self.gammas[i] = gamma
            self.increments[i] = full

    def _population(self) -> None:
        absent = self.faults.absent_clients
        self.responsive = [j for j in self.params.db_ids if j not in self.faults.dropped_dbs and j != self.failed]
        self.crg_clients = [i for i in self.params.client_ids if self._group(i) != self.failed]
        self.active = [i for i in self.crg_clients if i not in absent]
        benched = [i for i in self.params.client_ids if self._group(i) == self.failed]
        if benched:
            self.events.append(f"clients {benched} sit out: their database {self.failed} failed")
        self.routers: dict[int, int] = {}
        for g in sorted({self._group(i) for i in self.active}):
            members = [i for i in self.active if self._group(i) == g]
            self.routers[g] = self.streams.permutation("routers", self.r, g, items=members)[0]
        self.crg_groups = sorted(self.routers)
        self.orphans = [i for i in self.crg_clients if self._group(i) not in self.routers]
        size = 2 * self.A + 1
        self.blocks = [self.responsive[b * size : (b + 1) * size] for b in range(self.params.J + 1)]
        self.clients = {
            i: ClientState(
                client_id=i,
                group=self._group(i),
                gamma=self.gammas[i],
                incidence=self.GF([1 if k in self.gammas[i] else 0 for k in range(1, self.params.K + 1)]),
                increments=self.increments[i],
                is_router=i in self.routers.values(),
                crg_clients=tuple(self.crg_clients),
                crg_groups=tuple(self.crg_groups),
            )
            for i in self.crg_clients
        }

    def _decode_copies(self, copies: Sequence[PhaseMessage], what: str, missing=MissingRouterAnswerError) -> galois.FieldArray:
        needed = 2 * self.A + 1
        if len(copies) < needed:
            raise missing(f"{what}: {len(copies)} of {needed} copies arrived")
        if self.A == 0:
            return self.GF(copies[0].payload)
        payloads = [self.GF(m.payload) for m in copies[:needed]]
        if any(m.payload != copies[0].payload for m in copies[:needed]):
            logger.warning("Majority decoding engaged for %s", what)
            self.events.append(f"majority decoding engaged for {what}")
        return adversary_decode_repetition(payloads, self.A)

    # ------------------------------------------------------------ CRG

    def _crg(self, phase: Phase) -> None:
        nc, nr = len(self.crg_clients), len(self.crg_groups)
        router_ids = set(self.routers.values())
        if phase is Phase.PSU:
            set_shape: tuple[int, ...] = (self.params.K,)
            slot_shape: tuple[int, ...] = (self.params.K,)
        else:
            set_shape = (len(self.union), self.schedule.L_stored)
            slot_shape = (len(self.slots),)
        client_shape = (nc - 1, *set_shape)
        router_shape = (nr - 1, *slot_shape)
        with_c = phase is Phase.PSU

        for b, block in enumerate(self.blocks):
            client_rows = self.streams.field("crg", self.r, phase.value, b, "clients", shape=client_shape)
            router_rows = self.streams.field("crg", self.r, phase.value, b, "routers", shape=router_shape)
            c = self.streams.nonzero("crg", self.r, "c", b) if with_c else None
            for db in block:
                for pos, i in enumerate(self.crg_clients):
                    is_router = i in router_ids
                    full = is_router or pos == nc - 1
                    self.bus.send(crg_broadcast(db, i, phase, b, client_rows, router_rows, pos, full, is_router, c))
        self.bus.advance()

        for pos, i in enumerate(self.crg_clients):
            client = self.clients[i]
            full = client.is_router or pos == nc - 1
            received: dict[int, list[PhaseMessage]] = {}
            for msg in self.bus.collect(client_endpoint(i), MessageKind.CR_BROADCAST):
                received.setdefault(msg.meta["block"], []).append(msg)
            cs, client_parts, router_parts = [], [], []
            for b in range(len(self.blocks)):
                payload = self._decode_copies(
                    received.get(b, []), f"common randomness block {b} to C{i}", missing=MissingRandomnessError
                )
                c, rows, routers = crg_unpack(
                    self.GF, to_payload(payload), client_shape, router_shape, pos, full, client.is_router, with_c
                )
                cs.append(c)
                client_parts.append(rows)
                router_parts.append(routers)
            expected = len(self.blocks)
            if full:
                sets = crg_zero_sum_set(self.GF(np.stack([as_ints(p) for p in client_parts])), expected)
                own = sets[pos]
            else:
                sets = None
                own = self.GF(np.sum(np.stack([as_ints(p) for p in client_parts]), axis=0) % self.params.q)
            router_sets = None
            if client.is_router:
                router_sets = crg_zero_sum_set(self.GF(np.stack([as_ints(p) for p in router_parts])), expected)

            if phase is Phase.PSU:
                client.c = crg_scalar_c(self.GF([int(v) for v in cs]), expected)
                client.w_psu = own
                if client.is_router:
                    client.client_set_psu = sets
                    client.router_set_psu = router_sets
            else:
                client.w_write = self._spread_rows(own)
                if client.is_router:
                    client.client_set_write = self.GF(np.stack([as_ints(self._spread_rows(s)) for s in sets]))
                    client.router_set_write = self._spread_slots(router_sets)

    def _spread_rows(self, values: galois.FieldArray) -> galois.FieldArray:
        full = self.GF.Zeros((self.params.K, self.schedule.L_stored))
        for kk, k in enumerate(self.union):
            full[k - 1] = values[kk]
        return full

    def _spread_slots(self, router_sets: galois.FieldArray) -> galois.FieldArray:
        full = self.GF.Zeros((router_sets.shape[0], self.params.K, len(self.schedule), self.schedule.D))
        for idx, (k, inst, col) in enumerate(self.slots):
            full[:, k - 1, inst, col] = router_sets[:, idx]
        return full

    # ------------------------------------------------------------ PSU

    def _psu(self) -> None:
        targets = sorted(self.dbs)
        for i in self.crg_clients:
            client = self.clients[i]
            for j in replica_databases(client.group, self.responsive, self.params.N, self.A):
                msg = psu_client_answer(client, j)
                self.bus.send(msg if j == client.group else msg.model_copy(update={"remedy": True}))
        self.bus.advance()

        for j in targets:
            by_group: dict[int, list[PhaseMessage]] = {}
            for msg in self.bus.collect(db_endpoint(j), MessageKind.AU1):
                by_group.setdefault(msg.meta["group"], []).append(msg)
            for g, answers in sorted(by_group.items()):
                if g not in self.routers:
                    continue
                msg = psu_db_aggregate(self.dbs[j], answers, g, self.routers[g])
                self.bus.send(msg if j == g else msg.model_copy(update={"remedy": True}))
        self.bus.advance()

        self.delivering: list[int] = []
        for g in self.crg_groups:
            router = self.clients[self.routers[g]]
            copies = self.bus.collect(
                client_endpoint(router.client_id), MessageKind.DU2, where=lambda m, g=g: m.meta["group"] == g
            )
            if len(copies) < 2 * self.A + 1:
                self.events.append(f"psu: database {g} silent, router C{router.client_id} idle")
                continue
            aggregate = self._decode_copies(copies, f"DU2 of group {g}")
            absent = [i for i in self.crg_clients if self._group(i) == g and i not in copies[0].meta["contributors"]]
            answers = psu_route_answer(router, aggregate, g, targets)
            if absent:
                answers = dropout_compensation_psu(router, answers, absent)
                logger.warning("Router C%d compensates absent clients %s in the union phase", router.client_id, absent)
                self.events.append(f"psu: router C{router.client_id} compensates absent clients {absent}")
            self.bus.send_all(answers)
            self.delivering.append(g)
        if not self.delivering:
            raise ProtocolAbortError("No group database delivered its union-phase aggregate")
        self.embedder = self.delivering[0]
        self.missing = {
            g: [i for i in self.crg_clients if self._group(i) == g] for g in self.crg_groups if g not in self.delivering
        }
        if self.missing or self.orphans:
            lead = self.clients[self.routers[self.embedder]]
            for j in targets:
                self.bus.send(db_dropout_compensation(lead, self.missing, j, Phase.PSU, orphans=self.orphans))
            logger.warning("Router C%d compensates silent groups %s", lead.client_id, sorted(self.missing))
            self.events.append(
                f"psu: router C{lead.client_id} compensates groups {sorted(self.missing)} and orphans {self.orphans}"
            )
        self.bus.advance()

        self.union_views: dict[int, frozenset[int]] = {}
        for j in targets:
            received = self.bus.collect(db_endpoint(j), MessageKind.AU2)
            answers = [m for m in received if "role" not in m.meta]
            compensations = [m for m in received if m.meta.get("role") == "db-compensation"]
            self.union_views[j] = psu_decode_union(self.dbs[j], answers, self.crg_groups, compensations)
        self.union = sorted(self.union_views[self.responsive[0]])
        logger.debug("Round %d union %s", self.r, self.union)

    # ------------------------------------------------------------ write

    def _download(self) -> None:
        requests = write_read_positions(self.schedule, self.union, self.A, self.responsive)
        for i in self.active:
            for db, positions in sorted(requests.items()):
                self.bus.send(
                    PhaseMessage(
                        kind=MessageKind.DW1REQ,
                        phase=Phase.WRITE,
                        sender=client_endpoint(i),
                        receiver=db_endpoint(db),
                        meta={"positions": [list(p) for p in positions]},
                    )
                )
        self.bus.advance()
        for db in sorted(requests):
            for request in self.bus.collect(db_endpoint(db), MessageKind.DW1REQ):
                positions = [tuple(p) for p in request.meta["positions"]]
                self.bus.send(write_db_respond(self.dbs[db], endpoint_id(request.sender), positions))
        self.bus.advance()
        self.recovery_ok = True
        for i in self.active:
            responses = {endpoint_id(m.sender): m for m in self.bus.collect(client_endpoint(i), MessageKind.DW1RESP)}
            recovered = recover_union_models(responses, self.schedule, self.union, self.psi, self.A)
            self.clients[i].recovered = recovered
            if any(not np.array_equal(recovered[k], self.sim.model[k - 1]) for k in self.union):
                self.recovery_ok = False
                self.events.append(f"write: C{i} recovered a model that differs from the stored one")

    def _write(self) -> None:
        schedule, union, psi = self.schedule, self.union, self.psi
        self._download()

        for i in self.crg_clients:
            client = self.clients[i]
            for j in replica_databases(client.group, self.responsive, self.params.N, self.A):
                msg = write_client_answer(client, union, j)
                self.bus.send(msg if j == client.group else msg.model_copy(update={"remedy": True}))
        self.bus.advance()

        for j in sorted(self.dbs):
            by_group: dict[int, list[PhaseMessage]] = {}
            for msg in self.bus.collect(db_endpoint(j), MessageKind.AW1):
                by_group.setdefault(msg.meta["group"], []).append(msg)
            for g, answers in sorted(by_group.items()):
                if g not in self.routers:
                    continue
                msg = write_db_aggregate(self.dbs[j], answers, union, g, self.routers[g])
                self.bus.send(msg if j == g else msg.model_copy(update={"remedy": True}))
        self.bus.advance()

        targets = self.params.db_ids
        self.write_contributors: dict[int, list[int]] = {}
        for g in self.delivering:
            router = self.clients[self.routers[g]]
            copies = self.bus.collect(
                client_endpoint(router.client_id), MessageKind.DW2, where=lambda m, g=g: m.meta["group"] == g
            )
            aggregate = self._decode_copies(copies, f"DW2 of group {g}")
            contributors = list(copies[0].meta["contributors"])
            self.write_contributors[g] = contributors
            answers = write_route_answer(
                router, aggregate, schedule, union, psi, targets,
                embed=g == self.embedder, rng=self.streams.generator("aw2", self.r, g), group=g,
            )
            self.bus.send_all(answers[j] for j in targets)
            absent = [i for i in self.crg_clients if self._group(i) == g and i not in contributors]
            if absent:
                for j in targets:
                    self.bus.send(write_beta_answer(router, absent, schedule, union, psi, j))
                logger.warning("Router C%d supplies beta for absent clients %s", router.client_id, absent)
                self.events.append(f"write: router C{router.client_id} supplies beta for absent clients {absent}")
        if self.missing or self.orphans:
            lead = self.clients[self.routers[self.embedder]]
            for j in targets:
                self.bus.send(
                    db_dropout_compensation(lead, self.missing, j, Phase.WRITE, schedule, union, psi, orphans=self.orphans)
                )
            self.events.append(f"write: router C{lead.client_id} compensates groups {sorted(self.missing)}")
        if self.failed is not None:
            for db in self.responsive[: 2 * self.A + 1]:
                self.bus.send(write_rhat_correction(self.dbs[db], self.failed, len(self.delivering), union, schedule, psi))
        self.bus.advance()

        for j in sorted(self.dbs):
            answers, compensations = self._write_answers(j)
            self.dbs[j] = write_commit_storage(self.dbs[j], answers, union, schedule, psi, self.crg_groups, compensations)
        if self.failed is not None:
            answers, compensations = self._write_answers(self.failed)
            corrections = self.bus.collect(
                db_endpoint(self.failed),
                MessageKind.REPAIR_SHARE,
                where=lambda m: m.meta.get("role") == "rhat-correction",
            )
            correction = self._decode_copies(corrections, f"Rhat correction for database {self.failed}")
            self.replacement = write_commit_storage(
                self.replacement, answers, union, schedule, psi, self.crg_groups, compensations, rhat_correction=correction
            )
        self.committed = True

    def _write_answers(self, j: int) -> tuple[list[PhaseMessage], list[PhaseMessage]]:
        received = self.bus.collect(db_endpoint(j), MessageKind.AW2)
        answers = [m for m in received if "role" not in m.meta]
        compensations = [m for m in received if m.meta.get("role") in ("beta", "db-compensation")]
        return answers, compensations

    # ------------------------------------------------------------ repair

    def _repair(self) -> None:
        rebuild = [k for k in range(1, self.params.K + 1) if k not in self.union]
        shares: list[PhaseMessage] = []
        if rebuild:
            router = self.clients[self.routers[self.embedder]]
            helpers = self.responsive[: self.params.D + 2 * self.A]
            for h in helpers:
                self.bus.send(repair_helper_share(self.dbs[h], self.failed, rebuild, self.psi, router.client_id))
            self.bus.advance()
            for share in self.bus.collect(client_endpoint(router.client_id), MessageKind.REPAIR_SHARE):
                self.bus.send(route_repair_share(router, share, self.failed))
            self.bus.advance()
            shares = self.bus.collect(
                db_endpoint(self.failed), MessageKind.REPAIR_SHARE, where=lambda m: m.meta.get("role") == "helper"
            )
        self.replacement = repair_failed_database(
            self.failed, self.union, shares, self.replacement, self.schedule, self.psi, self.params.K, self.A
        )
        logger.warning("Database %d replaced; %d submodels rebuilt from helpers", self.failed, len(rebuild))
        self.events.append(f"repair: database {self.failed} rebuilt, submodels {rebuild} from helper shares")

    # ------------------------------------------------------------ CRR

    def _crr(self, recipients: dict[int, DatabaseState]) -> dict[int, DatabaseState]:
        pairs = crr_pairs(self.active)
        K, Ls = self.params.K, self.schedule.L_stored
        core = [("psu", k, 0) for k in range(K)] + [("write", k - 1, s) for k in self.union for s in range(Ls)]
        extra = []
        if self.failed is not None:
            extra = [("write", k - 1, s) for k in range(1, K + 1) if k not in self.union for s in range(Ls)]
        parts = [("core", core), ("repair", extra)]

        def assigned(symbols, t):
            return [x for x in range(len(symbols)) if x % len(pairs) == t]

        for part, symbols in parts:
            for t, pair in enumerate(pairs):
                picks = assigned(symbols, t)
                if not picks:
                    continue
                for i in pair:
                    share = self.streams.field("crr", self.r, part, i, shape=len(picks))
                    for j in sorted(recipients):
                        self.bus.send(
                            PhaseMessage(
                                kind=MessageKind.CRR_SHARE,
                                phase=Phase.CRR,
                                sender=client_endpoint(i),
                                receiver=db_endpoint(j),
                                payload=to_payload(share),
                                meta={"pair": t, "part": part},
                                remedy=part == "repair",
                            )
                        )
        self.bus.advance()

        refreshed = {}
        for j, db in sorted(recipients.items()):
            received = self.bus.collect(db_endpoint(j), MessageKind.CRR_SHARE)
            rhat_psu, rhat_write = db.rhat_psu.copy(), db.rhat_write.copy()
            for part, symbols in parts:
                for t, pair in enumerate(pairs):
                    picks = assigned(symbols, t)
                    if not picks:
                        continue
                    by_sender = {
                        endpoint_id(m.sender): self.GF(m.payload)
                        for m in received
                        if m.meta["pair"] == t and m.meta["part"] == part
                    }
                    values = crr_refresh(by_sender.get(pair[0]), by_sender.get(pair[1]))
                    for value, x in zip(values, picks):
                        kind, k, s = symbols[x]
                        if kind == "psu":
                            rhat_psu[k] = value
                        else:
                            rhat_write[k, s] = value
            refreshed[j] = replace(db, rhat_psu=rhat_psu, rhat_write=rhat_write)
        return refreshed

    # ------------------------------------------------------------ round

    def execute(self) -> RoundReport:
        self._population()
        self.union: list[int] = []
        self.union_views = {}
        self.delivering = []
        self.embedder: Optional[int] = None
        self.write_contributors = {}
        self.committed = False
        self.recovery_ok = True

        if not self.active:
            if self.failed is not None:
                raise ProtocolAbortError(f"No active client can route the repair of database {self.failed}")
            self.events.append("no active clients: storage unchanged")
            self.end_dbs = dict(self.sim.dbs)
            for db in self.end_dbs.values():
                db.late_answers = []
            self.new_model = self.sim.model
            return self._report()
        if len(self.active) < 2:
            raise ProtocolAbortError("Server randomness refresh needs at least two active clients")

        self._crg(Phase.PSU)
        self._psu()
        if self.union:
            self.slots = [
                (k, inst, col)
                for k in self.union
                for inst, layout in enumerate(self.schedule.layouts)
                for col in layout.all_message_columns()
            ]
            self._crg(Phase.WRITE)
            self._write()
        else:
            self.events.append("empty union: write phase skipped")
        if self.failed is not None:
            self._repair()

        recipients = dict(self.dbs)
        if self.replacement is not None:
            recipients[self.failed] = self.replacement
        self.end_dbs = self._crr(recipients)

        self.bus.flush()
        for j, db in self.end_dbs.items():
            # only the latest round's stragglers are kept
            db.late_answers = self.bus.collect(db_endpoint(j), MessageKind.AU1) + self.bus.collect(
                db_endpoint(j), MessageKind.AW1
            )
            if db.late_answers:
                self.events.append(f"database {j} buffered {len(db.late_answers)} late answers")

        contributors = [i for i in self.active if self._group(i) in self.delivering]
        self.new_model = self.sim.model.copy()
        if self.union:
            for i in contributors:
                self.new_model += self.increments[i]
        logger.info("Round %d done: union %s, %d messages", self.r, self.union, len(self.bus.transcript))
        return self._report()

    # ------------------------------------------------------------ checks

    def _oracle_union(self) -> list[int]:
        contributors = [i for i in self.active if self._group(i) in self.delivering]
        return sorted({k for i in contributors for k in self.gammas[i]})

    def _reliable(self) -> bool:
        dbs = self.end_dbs
        live = sorted(dbs)
        D = self.params.D
        for k in range(1, self.params.K + 1):
            for inst, layout in enumerate(self.schedule.layouts):
                rows = [dbs[j].rows(k)[inst] for j in live[:D]]
                try:
                    result = reconstruct(rows, layout, self.psi)
                except (InconsistentRowsError, NotEnoughRowsError, DimensionMismatchError):
                    return False
                expected = self.new_model[k - 1][list(self.schedule.positions(inst))]
                if not np.array_equal(result.messages, expected):
                    return False
                for j in live:
                    if not np.array_equal(self.psi[j - 1] @ result.omega, dbs[j].rows(k)[inst].symbols):
                        return False
        return self.recovery_ok

    def _consistent(self) -> bool:
        dbs = list(self.end_dbs.values())
        first = dbs[0]
        for db in dbs[1:]:
            if sorted(db.coded_store) != sorted(first.coded_store):
                return False
            for k, rows in first.coded_store.items():
                if [r.symbols.shape for r in db.rows(k)] != [r.symbols.shape for r in rows]:
                    return False
            if not np.array_equal(db.rhat_psu, first.rhat_psu) or not np.array_equal(db.rhat_write, first.rhat_write):
                return False
        return True

    def _record(self) -> RoundRecord:
        return RoundRecord(
            q=self.params.q,
            K=self.params.K,
            psis=self.params.psi_values,
            schedule=self.schedule,
            union=list(self.union),
            crg_clients=list(self.crg_clients),
            crg_groups=list(self.crg_groups),
            routers=dict(self.routers),
            delivering_groups=list(self.delivering),
            embedder_group=self.embedder,
            write_contributors={g: list(c) for g, c in self.write_contributors.items()},
            crg_blocks=[list(b) for b in self.blocks],
            failed_db=self.failed,
            start_dbs=[j for j in self.params.db_ids if j != self.failed],
            end_dbs=sorted(self.end_dbs),
            transcript=list(self.bus.transcript),
        )

    def _report(self) -> RoundReport:
        options = self.sim.options
        params = self.params
        record = self.record = self._record()
        oracle_union = self._oracle_union()

        leakage, worst = Fraction(0), []
        eavesdropper = None
        if options.check_leakage:
            observed_sets = (
                [tuple(self.faults.eavesdropper_set)]
                if self.faults.eavesdropper_set
                else subsets(params.db_ids, params.E, options.subset_limit)
            )
            for observed in observed_sets:
                measured = measure_eavesdropper_leakage(record, observed)
                if not worst or measured > leakage:
                    leakage, worst = measured, list(observed)
            eavesdropper = leakage <= params.leak

        privacy = inter_client = None
        if options.check_privacy:
            privacy = all(
                measure_privacy(record, colluding) == 0
                for colluding in subsets(params.db_ids, params.J, options.subset_limit)
            )
            inter_client = all(measure_inter_client_privacy(record, router) == 0 for router in self.routers.values())

        untouched = not (self.faults.absent_clients or self.faults.dropped_dbs) and self.A == 0
        psu_expected = None
        if untouched and self.crg_groups:
            n_targets = len(self.dbs)
            psu_expected = (len(self.crg_clients) + len(self.crg_groups) * (1 + n_targets)) * params.K
        costs = meter_costs(
            self.bus.transcript, params, self.schedule, self.union, self.end_dbs,
            psu_expected=psu_expected, check_orders=self.A == 0,
        )
        cost_orders = None
        if costs.within_ceilings is not None:
            cost_orders = costs.within_ceilings and costs.psu_exact is not False

        verdicts = Verdicts(
            reliability=self._reliable(),
            union=all(sorted(view) == oracle_union for view in self.union_views.values())
            and self.union == oracle_union,
            privacy=privacy,
            inter_client=inter_client,
            eavesdropper=eavesdropper,
            storage_consistency=self._consistent(),
            cost_orders=cost_orders,
        )
        for name, value in verdicts.model_dump().items():
            if value is False:
                logger.warning("Round %d verdict %s failed", self.r, name)
        return RoundReport(
            schema_version=settings.SCHEMA_VERSION,
            round=self.r,
            seed=self.sim.seed,
            params=params,
            faults=self.faults,
            union=list(self.union),
            committed=self.committed,
            repaired=self.failed,
            leakage=canonical_fraction(leakage),
            leakage_bound=params.delta,
            eavesdropper_set=worst,
            costs=costs,
            verdicts=verdicts,
            transcript_hash=self.bus.transcript_hash(),
            transcript_length=len(self.bus.transcript),
            events=self.events,
        )


def run_round(
    params: SystemParams,
    inputs: RoundInputs,
    faults: Optional[FaultConfig] = None,
    seed: int = 0,
    initial_model: Optional[Sequence[Sequence[int]]] = None,
    options: Optional[SimulationOptions] = None,
) -> RoundReport:
    return FslSimulator(params, seed, initial_model, options).run_round(inputs, faults)


def run_rounds(
    params: SystemParams,
    rounds: Sequence[tuple[RoundInputs, Optional[FaultConfig]]],
    seed: int = 0,
    initial_model: Optional[Sequence[Sequence[int]]] = None,
    options: Optional[SimulationOptions] = None,
) -> list[RoundReport]:
    """Consecutive rounds over one storage; each round gets its own report."""
    if len(rounds) > settings.MAX_ROUNDS:
        raise ScenarioInfeasibleError(f"{len(rounds)} rounds exceed MAX_ROUNDS={settings.MAX_ROUNDS}")
    simulator = FslSimulator(params, seed, initial_model, options)
    return [simulator.run_round(inputs, faults) for inputs, faults in rounds]
