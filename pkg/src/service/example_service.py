"""Golden examples: the two ramp-code walk-throughs and the four-database training round."""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable

import numpy as np

from src.exceptions.exceptions import UnknownExampleError
from src.models.params_model import FaultConfig, RoundInputs, SystemParams
from src.service.codec_service import (
    build_layout,
    leakage_fraction,
    plan_time_sharing,
    realized_costs,
    ramp_bounds,
)
from src.service.simulation_service import FslSimulator
from src.utils.field_linalg import get_field, vandermonde

logger = logging.getLogger(__name__)


@dataclass
class GoldenCheck:
    label: str
    expected: str
    actual: str

    @property
    def passed(self) -> bool:
        return self.expected == self.actual


@dataclass
class ExampleResult:
    name: str
    checks: list[GoldenCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, label: str, expected, actual) -> None:
        self.checks.append(GoldenCheck(label, _show(expected), _show(actual)))


def _show(value) -> str:
    if isinstance(value, tuple):
        return "(" + ", ".join(_show(v) for v in value) + ")"
    if isinstance(value, (list, set, frozenset)):
        return "{" + ", ".join(_show(v) for v in sorted(value)) + "}"
    return str(value)


def _worst_leakage(layout, psi, N: int, size: int) -> Fraction:
    return max(leakage_fraction([layout], psi, set(observed)) for observed in combinations(range(1, N + 1), size))


def _ramp_walkthrough(name: str, D: int, lam: int, points) -> ExampleResult:
    """points: (extra messages, leakage, raw C1, normalized triple) per layout."""
    N, q = D + 1, 13
    psi = vandermonde(get_field(q), list(range(1, N + 1)), D)
    result = ExampleResult(name)
    for extra, leak, c1, triple in points:
        layout = build_layout(D, lam, extra)
        tag = f"extra={extra}"
        result.check(f"{tag} raw (C1, C2, S)", (c1, D, D * D), (layout.reconstruction_cost, D, D * D))
        normalized = tuple(Fraction(v, layout.B) for v in (layout.reconstruction_cost, D, D * D))
        result.check(f"{tag} normalized", triple, normalized)
        result.check(f"{tag} leakage of any {lam} databases", leak, _worst_leakage(layout, psi, N, lam))
        result.check(f"{tag} bound at leak={leak}", triple, ramp_bounds(D, lam, leak).as_tuple())
        result.check(f"{tag} time-shared plan at leak={leak}", triple, realized_costs(plan_time_sharing(D, lam, leak)).as_tuple())
    return result


def single_db_ramp() -> ExampleResult:
    F = Fraction
    return _ramp_walkthrough(
        "rsrc-ex1",
        D=3,
        lam=1,
        points=[
            (0, F(0), 5, (F(5, 3), F(1), F(3))),
            (1, F(1, 4), 5, (F(5, 4), F(3, 4), F(9, 4))),
            (2, F(2, 5), 5, (F(1), F(3, 5), F(9, 5))),
            (3, F(1, 2), 6, (F(1), F(1, 2), F(3, 2))),
        ],
    )


def two_db_ramp() -> ExampleResult:
    F = Fraction
    result = _ramp_walkthrough(
        "rsrc-ex2",
        D=3,
        lam=2,
        points=[
            (0, F(0), 3, (F(3), F(3), F(9))),
            (1, F(1, 2), 3, (F(3, 2), F(3, 2), F(9, 2))),
            (2, F(2, 3), 3, (F(1), F(1), F(3))),
        ],
    )
    for leak in (F(0), F(1, 2), F(2, 3)):
        result.check(
            f"3(1-l), 3(1-l), 9(1-l) at l={leak}",
            (3 * (1 - leak), 3 * (1 - leak), 9 * (1 - leak)),
            ramp_bounds(3, 2, leak).as_tuple(),
        )
    return result


def walkthrough_scenario() -> tuple[SystemParams, RoundInputs, FaultConfig]:
    """Four databases, four clients, database 4 lost at round start."""
    params = SystemParams(
        N=4, C=4, K=4, L=2, D=3, J=2, E=2, delta="1/2", q=13,
        group_assignment={1: 1, 2: 1, 3: 2, 4: 3},
    )
    inputs = RoundInputs(gammas={1: [1], 2: [1, 3], 3: [1, 4], 4: [1, 3, 4]})
    return params, inputs, FaultConfig(failed_db=4)


def fsl_round(seed: int = 0) -> ExampleResult:
    params, inputs, faults = walkthrough_scenario()
    simulator = FslSimulator(params, seed=seed)
    before = simulator.model.copy()
    report = simulator.run_round(inputs, faults)
    result = ExampleResult("fsl-round")
    result.check("union", {1, 3, 4}, set(report.union))
    result.check("stored length with padding", 4, simulator.schedule.L_stored)
    result.check("submodel 2 unchanged", True, bool(np.array_equal(simulator.model[1], before[1])))
    result.check("replacement database", 4, report.repaired)
    result.check("union-phase symbols", (4 + 3 + 9) * 4, report.costs.phases["psu"].total)
    for name, verdict in report.verdicts.model_dump().items():
        result.check(f"verdict {name}", True, verdict is not False)
    result.check("leakage within 1/2", True, Fraction(report.leakage) <= Fraction(1, 2))
    return result


EXAMPLES: dict[str, Callable[[], ExampleResult]] = {
    "rsrc-ex1": single_db_ramp,
    "rsrc-ex2": two_db_ramp,
    "fsl-round": fsl_round,
}


def run_example(name: str) -> ExampleResult:
    if name not in EXAMPLES:
        raise UnknownExampleError(f"Unknown example {name!r}; choose from {', '.join(EXAMPLES)}")
    result = EXAMPLES[name]()
    logger.info("Example %s: %d checks, passed=%s", name, len(result.checks), result.passed)
    return result
