from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

import galois
import numpy as np


class CellKind(str, Enum):
    MESSAGE = "M"
    RANDOMNESS = "R"


@dataclass(frozen=True)
class Cell:
    """One entry of the symmetric message matrix; index is 0-based within its kind."""

    kind: CellKind
    index: int

    @property
    def is_message(self) -> bool:
        return self.kind is CellKind.MESSAGE

    def label(self) -> str:
        return f"{self.kind.value}{self.index + 1}"


@dataclass(frozen=True)
class OmegaLayout:
    """Placement of message and randomness symbols in a D x D symmetric matrix.

    `extra` counts the message symbols placed beyond the secure upper-left
    block; mirrored cells share one symbol.
    """

    D: int
    lam: int
    extra: int
    cells: tuple[tuple[Cell, ...], ...]
    B: int
    R: int

    def cell(self, r: int, c: int) -> Cell:
        return self.cells[r][c]

    def distinct_cells(self) -> list[tuple[int, int, Cell]]:
        """Upper-triangle cells (r <= c), one per symbol."""
        return [(r, c, self.cells[r][c]) for r in range(self.D) for c in range(r, self.D)]

    def message_cells(self) -> list[tuple[int, int, int]]:
        return [(r, c, cell.index) for r, c, cell in self.distinct_cells() if cell.is_message]

    @property
    def columns_needed(self) -> int:
        """Leading columns a reader must solve to see every message cell."""
        if self.B == 0:
            return 0
        return 1 + max(min(r, c) for r, c, _ in self.message_cells())

    @property
    def reconstruction_cost(self) -> int:
        return sum(self.D - d for d in range(self.columns_needed))

    def all_message_columns(self) -> tuple[int, ...]:
        return tuple(
            c for c in range(self.D) if all(self.cells[r][c].is_message for r in range(self.D))
        )

    def render(self) -> str:
        return "\n".join(" ".join(cell.label().rjust(3) for cell in row) for row in self.cells)


@dataclass(frozen=True)
class RsrcPlan:
    """Two layouts used countA and countB times to hit a target leakage."""

    layout_a: OmegaLayout
    layout_b: OmegaLayout
    count_a: int
    count_b: int
    target_leak: Fraction
    lam: int
    D: int
    region: int

    @property
    def instances(self) -> tuple[OmegaLayout, ...]:
        # less leaky layout first
        return (self.layout_a,) * self.count_a + (self.layout_b,) * self.count_b

    @property
    def total_messages(self) -> int:
        return self.count_a * self.layout_a.B + self.count_b * self.layout_b.B


@dataclass(frozen=True)
class InstanceSchedule:
    """Per-submodel sequence of layouts covering L real symbols (L_stored with padding)."""

    layouts: tuple[OmegaLayout, ...]
    offsets: tuple[int, ...]
    L: int
    L_stored: int
    passes: int

    @property
    def D(self) -> int:
        return self.layouts[0].D

    def __len__(self) -> int:
        return len(self.layouts)

    def positions(self, instance: int) -> range:
        start = self.offsets[instance]
        return range(start, start + self.layouts[instance].B)

    def locate(self, position: int) -> tuple[int, int]:
        """Map a stored message position to (instance, message index)."""
        for inst in range(len(self.layouts)):
            if position in self.positions(inst):
                return inst, position - self.offsets[inst]
        raise IndexError(f"Position {position} outside stored length {self.L_stored}")


@dataclass
class OmegaInstance:
    layout: OmegaLayout
    message_values: galois.FieldArray
    randomness_values: galois.FieldArray

    def matrix(self) -> galois.FieldArray:
        GF = type(self.message_values)
        omega = GF.Zeros((self.layout.D, self.layout.D))
        for r in range(self.layout.D):
            for c in range(self.layout.D):
                cell = self.layout.cell(r, c)
                source = self.message_values if cell.is_message else self.randomness_values
                omega[r, c] = source[cell.index]
        return omega


@dataclass
class CodedRow:
    db_index: int
    instance_id: int
    symbols: galois.FieldArray

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodedRow):
            return NotImplemented
        return (
            self.db_index == other.db_index
            and self.instance_id == other.instance_id
            and np.array_equal(self.symbols, other.symbols)
        )


@dataclass(frozen=True)
class CostTriple:
    c1: Fraction
    c2: Fraction
    s: Fraction

    def as_tuple(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.c1, self.c2, self.s)


@dataclass
class ReconstructionResult:
    messages: galois.FieldArray
    consumed: list[tuple[int, int]] = field(default_factory=list)
    omega: Optional[galois.FieldArray] = None
