"""Ramp secure regenerating code.

A D x D symmetric message matrix Omega mixes message and randomness
symbols; database j stores row j of Psi @ Omega where Psi is an N x D
Vandermonde matrix. Moving randomness cells to message cells along the
ramp trades leakage against reconstruction, repair and storage cost.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from math import ceil, gcd
from typing import Mapping, Sequence, Union

import galois
import numpy as np

from src.exceptions.exceptions import (
    BadRampParamsError,
    DimensionMismatchError,
    InconsistentRowsError,
    NotEnoughRowsError,
    SelfRepairError,
    SingularMatrixError,
)
from src.models.codec_model import (
    Cell,
    CellKind,
    CodedRow,
    CostTriple,
    InstanceSchedule,
    OmegaInstance,
    OmegaLayout,
    ReconstructionResult,
    RsrcPlan,
)
from src.utils.field_linalg import mat_inv, rank

logger = logging.getLogger(__name__)


def _check_ramp(D: int, lam: int) -> None:
    if D < 2 or not 0 < lam < D:
        raise BadRampParamsError(f"Ramp needs 0 < lambda < D, got D={D}, lambda={lam}")


def _check_leak(leak: Fraction) -> Fraction:
    leak = Fraction(leak)
    if not 0 <= leak <= 1:
        raise BadRampParamsError(f"Leakage target must lie in [0, 1], got {leak}")
    return leak


def max_extra_messages(D: int, lam: int) -> int:
    n = D - lam
    return D * (D + 1) // 2 - n * (n + 1) // 2


def build_layout(D: int, lam: int, extra_messages: int) -> OmegaLayout:
    """Place messages in fill order and number symbols row-major over the upper triangle."""
    _check_ramp(D, lam)
    n = D - lam
    if not 0 <= extra_messages <= max_extra_messages(D, lam):
        raise BadRampParamsError(
            f"extra_messages must lie in [0, {max_extra_messages(D, lam)}], got {extra_messages}"
        )

    fill_order = [(r, c) for r in range(n) for c in range(r + 1)]
    fill_order += [(r, c) for r in range(n, D) for c in range(n)]
    fill_order += [(r, c) for r in range(n, D) for c in range(n, r + 1)]
    message_cells = set(fill_order[: n * (n + 1) // 2 + extra_messages])

    grid: list[list[Cell]] = [[None] * D for _ in range(D)]  # type: ignore[list-item]
    counters = {CellKind.MESSAGE: 0, CellKind.RANDOMNESS: 0}
    for r in range(D):
        for c in range(r, D):
            kind = CellKind.MESSAGE if (c, r) in message_cells else CellKind.RANDOMNESS
            cell = Cell(kind, counters[kind])
            counters[kind] += 1
            grid[r][c] = cell
            grid[c][r] = cell

    return OmegaLayout(
        D=D,
        lam=lam,
        extra=extra_messages,
        cells=tuple(tuple(row) for row in grid),
        B=counters[CellKind.MESSAGE],
        R=counters[CellKind.RANDOMNESS],
    )


def breakpoints(D: int, lam: int) -> tuple[Fraction, Fraction]:
    """Leak levels where the cheapest layout pair changes."""
    first = Fraction(2 * lam, D + lam + 1)
    saturation = Fraction(2 * lam * D - lam * (lam - 1), D * (D + 1))
    return first, saturation


def ramp_bounds(D: int, lam: int, leak: Fraction) -> CostTriple:
    """Normalized (C1/B, C2/B, S/B) achievable at a leakage fraction."""
    _check_ramp(D, lam)
    leak = _check_leak(leak)
    first, saturation = breakpoints(D, lam)
    n = D - lam

    if leak <= first:
        c1 = Fraction(D + lam + 1, n + 1) * (1 - leak)
    else:
        c1 = Fraction(1)
    if leak <= saturation:
        c2 = Fraction(2 * D, n * (n + 1)) * (1 - leak)
    else:
        c2 = Fraction(2, D + 1)
    return CostTriple(c1=c1, c2=c2, s=D * c2)


def region_of(D: int, lam: int, leak: Fraction) -> int:
    first, saturation = breakpoints(D, lam)
    if leak <= first:
        return 1
    if leak < saturation:
        return 2
    return 3


def plan_time_sharing(D: int, lam: int, leak: Fraction) -> RsrcPlan:
    """Pick two ramp layouts and their instance counts for a target leakage p1/p2."""
    _check_ramp(D, lam)
    leak = _check_leak(leak)
    p1, p2 = leak.numerator, leak.denominator
    n = D - lam
    secure = build_layout(D, lam, 0)
    middle = build_layout(D, lam, lam * n)
    full = build_layout(D, lam, max_extra_messages(D, lam))

    region = region_of(D, lam, leak)
    if region == 1:
        layout_a, layout_b = secure, middle
        count_a = 2 * lam * n * p2 - n * (D + lam + 1) * p1
        count_b = n * (n + 1) * p1
    elif region == 2:
        layout_a, layout_b = middle, full
        count_a = (2 * lam * D - lam * lam + lam) * p2 - D * (D + 1) * p1
        count_b = n * (D + lam + 1) * p1 - 2 * lam * n * p2
    else:
        layout_a, layout_b = full, full
        count_a, count_b = 1, 0

    divisor = gcd(count_a, count_b)
    if divisor > 1:
        count_a //= divisor
        count_b //= divisor
    logger.debug("Plan D=%d lambda=%d leak=%s: region %d counts (%d, %d)", D, lam, leak, region, count_a, count_b)
    return RsrcPlan(
        layout_a=layout_a,
        layout_b=layout_b,
        count_a=count_a,
        count_b=count_b,
        target_leak=leak,
        lam=lam,
        D=D,
        region=region,
    )


def schedule_instances(plan: RsrcPlan, L: int) -> InstanceSchedule:
    """Repeat the plan's instances until L symbols fit; the tail is padded."""
    if L < 1:
        raise BadRampParamsError(f"Submodel length must be positive, got {L}")
    per_pass = plan.instances
    passes = ceil(L / plan.total_messages)
    layouts = per_pass * passes
    offsets, start = [], 0
    for layout in layouts:
        offsets.append(start)
        start += layout.B
    return InstanceSchedule(layouts=layouts, offsets=tuple(offsets), L=L, L_stored=start, passes=passes)


def encode_instance(inst: OmegaInstance, psi: galois.FieldArray, instance_id: int = 0) -> list[CodedRow]:
    if psi.ndim != 2 or psi.shape[1] != inst.layout.D:
        raise DimensionMismatchError(f"Encoding matrix {psi.shape} does not match D={inst.layout.D}")
    zeta = psi @ inst.matrix()
    return [CodedRow(db_index=j + 1, instance_id=instance_id, symbols=zeta[j]) for j in range(psi.shape[0])]


def read_positions(layout: OmegaLayout, dbs: Sequence[int]) -> list[tuple[int, int]]:
    """(db, column) pairs a reader downloads: column d from the first D-d databases."""
    D = layout.D
    if len(dbs) < D:
        raise NotEnoughRowsError(f"Need {D} databases, got {len(dbs)}")
    return [(db, d) for d in range(layout.columns_needed) for db in list(dbs)[: D - d]]


def reconstruct_from_symbols(
    symbols: Mapping[tuple[int, int], galois.FieldArray],
    layout: OmegaLayout,
    psi: galois.FieldArray,
    dbs: Sequence[int],
) -> ReconstructionResult:
    """Column-wise decode from the minimal download set.

    Column d leaves D-d unknowns once the entries above the diagonal are
    filled in from earlier columns by symmetry.
    """
    GF = type(psi)
    D = layout.D
    dbs = list(dbs)[:D]
    if len(dbs) < D:
        raise NotEnoughRowsError(f"Need {D} databases, got {len(dbs)}")
    omega = GF.Zeros((D, D))
    consumed: list[tuple[int, int]] = []
    for d in range(layout.columns_needed):
        rows = dbs[: D - d]
        try:
            z = GF([int(symbols[(db, d)]) for db in rows])
        except KeyError as e:
            raise NotEnoughRowsError(f"Missing coded symbol {e.args[0]}")
        consumed.extend((db, d) for db in rows)
        psi_rows = psi[[db - 1 for db in rows], :]
        if d:
            z = z - psi_rows[:, :d] @ omega[:d, d]
        column = mat_inv(psi_rows[:, d:]) @ z
        omega[d:, d] = column
        omega[d, d:] = column
    messages = GF.Zeros(layout.B)
    for r, c, index in layout.message_cells():
        messages[index] = omega[r, c]
    return ReconstructionResult(messages=messages, consumed=consumed)


def reconstruct(rows: Sequence[CodedRow], layout: OmegaLayout, psi: galois.FieldArray) -> ReconstructionResult:
    """Recover the B messages of one instance from D coded rows of distinct databases."""
    D = layout.D
    by_db = {row.db_index: row for row in rows}
    if len(by_db) < D:
        raise NotEnoughRowsError(f"Need rows from {D} distinct databases, got {len(by_db)}")
    if len({row.instance_id for row in rows}) > 1:
        raise InconsistentRowsError("Rows come from different instances")
    dbs = sorted(by_db)[:D]
    for db in dbs:
        if by_db[db].symbols.shape != (D,):
            raise DimensionMismatchError(f"Row of database {db} has shape {by_db[db].symbols.shape}")

    GF = type(psi)
    zeta = GF(np.vstack([by_db[db].symbols.view(np.ndarray) for db in dbs]))
    try:
        omega = mat_inv(psi[[db - 1 for db in dbs], :]) @ zeta
    except SingularMatrixError:
        raise InconsistentRowsError("Encoding rows of the chosen databases are singular")
    if not np.array_equal(omega, omega.T):
        raise InconsistentRowsError("Decoded message matrix is not symmetric")

    symbols = {(db, d): by_db[db].symbols[d] for db in dbs for d in range(D)}
    result = reconstruct_from_symbols(symbols, layout, psi, dbs)
    result.omega = omega
    return result


def repair_share(row: CodedRow, psi: galois.FieldArray, failed: int) -> galois.FieldArray:
    if row.db_index == failed:
        raise SelfRepairError(f"Database {failed} cannot help repair itself")
    return row.symbols @ psi[failed - 1]


def repair_assemble(
    shares: Mapping[int, galois.FieldArray],
    psi: galois.FieldArray,
    failed: int,
    instance_id: int = 0,
) -> CodedRow:
    """Rebuild the failed row as (Omega Psi_f)^T from D helper shares."""
    D = psi.shape[1]
    if failed in shares:
        raise SelfRepairError(f"Database {failed} cannot help repair itself")
    helpers = sorted(shares)[:D]
    if len(helpers) < D:
        raise NotEnoughRowsError(f"Need {D} helper shares, got {len(helpers)}")
    GF = type(psi)
    s = GF([int(shares[h]) for h in helpers])
    projection = mat_inv(psi[[h - 1 for h in helpers], :]) @ s
    return CodedRow(db_index=failed, instance_id=instance_id, symbols=projection)


def symbol_forms(
    layout: OmegaLayout, psi: galois.FieldArray, db: int
) -> tuple[galois.FieldArray, galois.FieldArray]:
    """Coefficients of database db's D symbols over (messages, randomness)."""
    GF = type(psi)
    D = layout.D
    row = psi[db - 1]
    message_part = GF.Zeros((D, layout.B))
    random_part = GF.Zeros((D, layout.R))
    for d in range(D):
        for r in range(D):
            cell = layout.cell(r, d)
            target = message_part if cell.is_message else random_part
            target[d, cell.index] += row[r]
    return message_part, random_part


def leaked_symbols(layout: OmegaLayout, psi: galois.FieldArray, observed_dbs) -> int:
    """rank[A|B] - rank[B] for one instance seen by the observed databases."""
    if not observed_dbs:
        return 0
    forms = [symbol_forms(layout, psi, db) for db in sorted(observed_dbs)]
    GF = type(psi)
    message_part = GF(np.vstack([m.view(np.ndarray) for m, _ in forms]))
    random_part = GF(np.vstack([r.view(np.ndarray) for _, r in forms]))
    joint = GF(np.hstack([message_part.view(np.ndarray), random_part.view(np.ndarray)]))
    return rank(joint) - rank(random_part)


def leakage_fraction(
    layouts: Union[RsrcPlan, InstanceSchedule, Sequence[OmegaLayout]],
    psi: galois.FieldArray,
    observed_dbs,
) -> Fraction:
    """Message information visible to the observed databases, over all message symbols."""
    if isinstance(layouts, RsrcPlan):
        layouts = layouts.instances
    elif isinstance(layouts, InstanceSchedule):
        layouts = layouts.layouts
    total = sum(layout.B for layout in layouts)
    if not observed_dbs or total == 0:
        return Fraction(0)
    cache: dict[OmegaLayout, int] = {}
    leaked = 0
    for layout in layouts:
        if layout not in cache:
            cache[layout] = leaked_symbols(layout, psi, observed_dbs)
        leaked += cache[layout]
    return Fraction(leaked, total)


def realized_costs(plan: RsrcPlan) -> CostTriple:
    """Per-instance C1 from the read rule, C2 = D, S = D^2, normalized by total B."""
    total = plan.total_messages
    instances = [(plan.layout_a, plan.count_a), (plan.layout_b, plan.count_b)]
    c1 = sum(layout.reconstruction_cost * count for layout, count in instances)
    count = plan.count_a + plan.count_b
    c2 = Fraction(plan.D * count, total)
    return CostTriple(c1=Fraction(c1, total), c2=c2, s=plan.D * c2)


def bounds_table(D: int, lam: int, leaks: Sequence[Fraction]) -> list[tuple[Fraction, int, CostTriple]]:
    """(leak, region, normalized costs) per grid point."""
    rows = []
    for leak in leaks:
        triple = ramp_bounds(D, lam, leak)
        rows.append((Fraction(leak), region_of(D, lam, Fraction(leak)), triple))
    return rows
