import json
import logging
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from src.exceptions.exceptions import ConfigError
from src.models.report_model import RoundReport
from src.models.scenario_model import ScenarioConfig

logger = logging.getLogger(__name__)


def _field_path(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "<root>"
    return f"{location}: {first['msg']}"


class ScenarioRepository:
    """
    Reads scenario and increment files and writes reports and transcripts.

    All file access of the command line goes through this class.
    """

    def _read_json(self, path: str) -> Any:
        try:
            return json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"File not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: line {e.lineno}: {e.msg}")
        except OSError as e:
            raise ConfigError(f"Failed to read {path}: {str(e)}")

    def load_scenario(self, path: str, overrides: Optional[dict[str, Any]] = None) -> ScenarioConfig:
        """
        Load and validate a scenario file.

        Args:
            path: JSON scenario file
            overrides: top-level keys replacing the file's values before validation

        Raises:
            ConfigError: naming the offending field path
        """
        raw = self._read_json(path)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: a scenario must be a JSON object")
        raw.update(overrides or {})
        try:
            scenario = ScenarioConfig.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"{path}: {_field_path(e)}")
        if scenario.inputs.increment_source == "file":
            if scenario.increments_file is None:
                raise ConfigError(f"{path}: inputs.increment_source is 'file' but increments_file is missing")
            base = Path(path).parent
            increments = self.load_increments(str(base / scenario.increments_file))
            scenario = scenario.model_copy(
                update={"inputs": scenario.inputs.model_copy(update={"increments": increments})}
            )
        logger.debug("Loaded scenario %s", path)
        return scenario

    def load_increments(self, path: str) -> dict[int, list[list[int]]]:
        raw = self._read_json(path)
        try:
            return {int(client): [[int(v) for v in row] for row in matrix] for client, matrix in raw.items()}
        except (AttributeError, TypeError, ValueError) as e:
            raise ConfigError(f"{path}: increments must map client ids to integer matrices ({str(e)})")

    def write_report(self, path: str, reports: Sequence[RoundReport]) -> None:
        """One report is written as an object, several as a list."""
        documents = [report.model_dump(mode="json") for report in reports]
        document = documents[0] if len(documents) == 1 else documents
        try:
            Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
        except OSError as e:
            raise ConfigError(f"Failed to write report {path}: {str(e)}")
        logger.info("Report written to %s", path)

    def write_transcript(self, path: str, lines: Sequence[str]) -> None:
        try:
            Path(path).write_text("".join(line + "\n" for line in lines))
        except OSError as e:
            raise ConfigError(f"Failed to write transcript {path}: {str(e)}")
