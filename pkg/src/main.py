from typing import Optional, Sequence

import click

from src.config.logging_config import configure_logging
from src.config.settings import get_settings
from src.controller.cli_controller import EXIT_CONFIG, bounds_command, example_command, run_command

settings = get_settings()


def create_cli() -> click.Group:
    @click.group(help="Secure distributed federated submodel learning simulator")
    @click.option("--log-level", default=None, help="Root log level, LOG_LEVEL when omitted")
    def cli(log_level: Optional[str]):
        configure_logging(log_level or settings.LOG_LEVEL)

    # Register commands
    cli.add_command(bounds_command)
    cli.add_command(example_command)
    cli.add_command(run_command)
    return cli


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; click usage errors map to the configuration exit code."""
    cli = create_cli()
    try:
        code = cli.main(args=argv, prog_name="fsl-sim", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return 1
    return code or 0
