import click

from dwp import __version__

from .config import Config
from .utils.helpers import configure_logging


def create_cli():
    @click.group(context_settings={"help_option_names": ["-h", "--help"]})
    @click.version_option(__version__, prog_name="dwp")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                  help="Run configuration YAML")
    @click.option("--log-level", default=None, help="Logging level (default: DWP_LOG_LEVEL or INFO)")
    @click.option("--json-logs", is_flag=True, default=False, help="Emit JSON log lines")
    @click.pass_context
    def cli(ctx, config_path, log_level, json_logs):
        """Density-weighted proportion of carcasses in searched area"""
        configure_logging(log_level or Config.LOG_LEVEL, json_logs or Config.JSON_LOGS)
        ctx.ensure_object(dict)
        ctx.obj["config"] = config_path

    # Register commands
    from .commands.prep import prep
    from .commands.fit import fit, filter_cmd
    from .commands.coverage import psi, dwp, export
    from .commands.simulate import simulate

    cli.add_command(prep)
    cli.add_command(fit)
    cli.add_command(filter_cmd, name="filter")
    cli.add_command(psi)
    cli.add_command(dwp)
    cli.add_command(export)
    cli.add_command(simulate)

    return cli
