"""Symbol-exact traffic and storage metering against the closed-form cost orders."""

import logging
from typing import Iterable, Mapping, Optional, Sequence

from src.models.codec_model import InstanceSchedule
from src.models.message_model import Phase, PhaseMessage, is_db
from src.models.params_model import SystemParams
from src.models.report_model import CostReport, PhaseCost
from src.models.state_model import DatabaseState

logger = logging.getLogger(__name__)


class CostMeter:
    """Accumulates per-phase symbol counts from bus traffic."""

    def __init__(self):
        self.phases: dict[str, PhaseCost] = {phase.value: PhaseCost() for phase in Phase}

    def record(self, msg: PhaseMessage) -> None:
        cost = self.phases[msg.phase.value]
        if msg.remedy:
            cost.remedy += msg.length
        elif is_db(msg.sender) and is_db(msg.receiver):
            cost.server += msg.length
        elif is_db(msg.sender):
            cost.downlink += msg.length
        elif is_db(msg.receiver):
            cost.uplink += msg.length

    def record_all(self, transcript: Iterable[tuple[int, PhaseMessage]]) -> "CostMeter":
        for _, msg in transcript:
            self.record(msg)
        return self

    @property
    def total(self) -> int:
        return sum(cost.total for cost in self.phases.values())

    @property
    def remedy_total(self) -> int:
        return sum(cost.remedy for cost in self.phases.values())


def stored_symbols(db: DatabaseState) -> int:
    coded = sum(row.symbols.size for rows in db.coded_store.values() for row in rows)
    return coded + db.rhat_psu.size + db.rhat_write.size


def cost_ceilings(params: SystemParams, schedule: InstanceSchedule, union_size: int) -> dict[str, int]:
    N, C, K, D, J, A = params.N, params.C, params.K, params.D, params.J, params.A
    Ls = schedule.L_stored
    G = union_size
    c1 = sum(layout.reconstruction_cost for layout in schedule.layouts)
    n_inst = len(schedule)
    return {
        # the scalar c adds one symbol per recipient and contributor
        "crg": (J + 1) * N * (N - 1) * (K + D * G * Ls)
        + (J + 1) * (N + 2) * max(C - 1, 0) * (K + G * Ls)
        + (J + 1) * (C + N),
        "psu": (C + N + N * N) * K,
        "write": C * G * c1 + (C + N) * G * Ls + N * N * D * G * Ls,
        "crr": 2 * N * (K + G * Ls),
        "repair": (2 * (D + 2 * A) + (2 * A + 1) * D) * K * Ls,
        "storage": N * (K * n_inst * D * D + K + K * Ls),
    }


def meter_costs(
    transcript: Sequence[tuple[int, PhaseMessage]],
    params: SystemParams,
    schedule: InstanceSchedule,
    union: Iterable[int],
    dbs: Mapping[int, DatabaseState],
    psu_expected: Optional[int] = None,
    check_orders: bool = True,
) -> CostReport:
    """Totals per phase, storage per database and the order checks.

    psu_expected is the exact union-phase cost when no client or database
    was absent; order checks are skipped when check_orders is False.
    """
    meter = CostMeter().record_all(transcript)
    storage = {j: stored_symbols(db) for j, db in sorted(dbs.items())}
    ceilings = cost_ceilings(params, schedule, len(set(union)))

    psu_exact = None
    if psu_expected is not None:
        psu_exact = meter.phases[Phase.PSU.value].total == psu_expected
    within = None
    if check_orders:
        within = all(meter.phases[name].total <= ceilings[name] for name in ("crg", "psu", "write", "crr", "repair"))
        within = within and sum(storage.values()) <= ceilings["storage"]
        if not within:
            logger.warning("Metered traffic exceeds a closed-form ceiling: %s", {
                name: cost.total for name, cost in meter.phases.items()
            })
    return CostReport(
        q=params.q,
        phases=meter.phases,
        total=meter.total,
        remedy_total=meter.remedy_total,
        storage_per_db=storage,
        storage_total=sum(storage.values()),
        ceilings=ceilings,
        psu_expected=psu_expected,
        psu_exact=psu_exact,
        within_ceilings=within,
    )
