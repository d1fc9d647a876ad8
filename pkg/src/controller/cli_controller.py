import json
import logging
from fractions import Fraction
from typing import Optional

import click

from src.config.settings import get_settings
from src.exceptions.exceptions import (
    BadRampParamsError,
    ConfigError,
    ProtocolAbortError,
    ScenarioInfeasibleError,
    UnknownExampleError,
)
from src.models.params_model import canonical_fraction
from src.repository.scenario_repository import ScenarioRepository
from src.service.codec_service import bounds_table
from src.service.example_service import run_example
from src.service.simulation_service import FslSimulator

logger = logging.getLogger(__name__)
settings = get_settings()

EXIT_OK = 0
EXIT_VERDICT = 2
EXIT_INFEASIBLE = 3
EXIT_CONFIG = 4

DEFAULT_GRID = "0,1/4,2/5,1/2,1"


def _fail(message: str, code: int) -> None:
    click.echo(f"Error: {message}", err=True)
    raise click.exceptions.Exit(code)


def _show(value: Fraction) -> str:
    return f"{value} ({float(value):.4f})"


@click.command("bounds")
@click.argument("d", type=int)
@click.argument("lam", type=int, metavar="LAMBDA")
@click.option("--grid", default=DEFAULT_GRID, show_default=True, help="Comma-separated leakage fractions")
def bounds_command(d: int, lam: int, grid: str):
    """Print normalized reconstruction, repair and storage costs per leakage level."""
    try:
        leaks = [Fraction(canonical_fraction(value.strip())) for value in grid.split(",") if value.strip()]
        rows = bounds_table(d, lam, leaks)
    except ValueError as e:
        _fail(f"invalid --grid: {str(e)}", EXIT_CONFIG)
    except BadRampParamsError as e:
        _fail(str(e), EXIT_CONFIG)

    click.echo(f"D={d} lambda={lam}")
    click.echo("leak\tregion\tC1/B\tC2/B\tS/B")
    for leak, region, triple in rows:
        click.echo("\t".join([str(leak), str(region), _show(triple.c1), _show(triple.c2), _show(triple.s)]))


@click.command("example")
@click.argument("name")
def example_command(name: str):
    """Replay a golden example and diff it against the expected numbers."""
    try:
        result = run_example(name)
    except UnknownExampleError as e:
        _fail(str(e), EXIT_CONFIG)
    except (ScenarioInfeasibleError, ProtocolAbortError) as e:
        _fail(str(e), EXIT_INFEASIBLE)

    for check in result.checks:
        status = "ok  " if check.passed else "FAIL"
        click.echo(f"{status} {check.label}: expected {check.expected}, got {check.actual}")
    click.echo(f"{result.name}: {'pass' if result.passed else 'FAIL'}")
    raise click.exceptions.Exit(EXIT_OK if result.passed else EXIT_VERDICT)


@click.command("run")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(dir_okay=False), help="Scenario JSON file")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the scenario seed")
@click.option("--report", "report_path", default=None, help="Report path")
@click.option("--modulus", type=int, default=None, help="Override the prime field modulus")
@click.option("--faults", "faults_json", default=None, help="Inline JSON replacing the scenario faults")
@click.option("--rounds", type=click.IntRange(min=1), default=None, help="Number of consecutive rounds")
@click.option("--transcript", "transcript_path", default=None, help="Write the message transcript here")
def run_command(
    scenario_path: str,
    seed: Optional[int],
    report_path: Optional[str],
    modulus: Optional[int],
    faults_json: Optional[str],
    rounds: Optional[int],
    transcript_path: Optional[str],
):
    """Run a scenario and write its round report."""
    repository = ScenarioRepository()
    try:
        overrides = {}
        if faults_json is not None:
            try:
                overrides["faults"] = json.loads(faults_json)
            except json.JSONDecodeError as e:
                raise ConfigError(f"--faults is not valid JSON: {e.msg}")
        if seed is not None:
            overrides["seed"] = seed
        if rounds is not None:
            overrides["rounds"] = rounds
        scenario = repository.load_scenario(scenario_path, overrides)
        params = scenario.params
        if modulus is not None:
            params = params.model_copy(update={"q": modulus})
        run_seed = scenario.seed if scenario.seed is not None else settings.DEFAULT_SEED

        simulator = FslSimulator(params, seed=run_seed, initial_model=scenario.initial_model)
        reports, lines = [], []
        for index in range(scenario.rounds):
            reports.append(simulator.run_round(scenario.inputs, scenario.faults))
            if scenario.rounds > 1:
                lines.append(f"# round {index}")
            lines.extend(simulator.last_transcript)

        repository.write_report(report_path or scenario.output or settings.REPORT_PATH, reports)
        transcript_target = transcript_path or scenario.transcript or settings.TRANSCRIPT_PATH
        if transcript_target:
            repository.write_transcript(transcript_target, lines)
    except ConfigError as e:
        _fail(str(e), EXIT_CONFIG)
    except (ScenarioInfeasibleError, ProtocolAbortError) as e:
        _fail(str(e), EXIT_INFEASIBLE)

    for report in reports:
        failed = [name for name, value in report.verdicts.model_dump().items() if value is False]
        click.echo(
            f"round {report.round}: union {report.union}, leakage {report.leakage} (bound {report.leakage_bound}), "
            f"traffic {report.costs.total} symbols, "
            + ("all verdicts pass" if not failed else f"failed: {', '.join(failed)}")
        )
    passed = all(report.verdicts.all_pass for report in reports)
    raise click.exceptions.Exit(EXIT_OK if passed else EXIT_VERDICT)
