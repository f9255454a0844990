import click

from dwp.coverage_estimation import dwp_summary

from ..services.pipeline_service import PipelineService
from ..utils.helpers import echo_table, handle_errors
from ..utils.options import export_options, out_option, run_config, seed_option

pipeline_service = PipelineService()


def _echo_summaries(results, what):
    for label, draws in results.items():
        heading = f"{what} ({draws.form.value})"
        click.echo(f"== {label}: {heading} ==" if label else heading)
        echo_table(dwp_summary(draws))


@click.command("psi")
@click.option("--model", default=None, help="Force a model instead of the filter's selection")
@click.option("--nsim", type=int, default=None, help="Number of parameter draws")
@seed_option
@out_option
@click.pass_obj
@handle_errors
def psi(obj, **flags):
    """Simulate psi per turbine from the chosen model"""
    cfg = run_config(obj, **flags)
    _echo_summaries(pipeline_service.psi(cfg), "psi")


@click.command("dwp")
@seed_option
@out_option
@click.pass_obj
@handle_errors
def dwp(obj, **flags):
    """Turn psi draws and carcass counts into dwp draws"""
    cfg = run_config(obj, **flags)
    _echo_summaries(pipeline_service.dwp(cfg), "dwp")


@click.command("export")
@export_options
@click.option("--file", "path", type=click.Path(dir_okay=False), default=None,
              help="Output CSV (default: <out>/genest.csv)")
@out_option
@click.pass_obj
@handle_errors
def export(obj, path, **flags):
    """Write dwp in the layout GenEst reads"""
    cfg = run_config(obj, **flags)
    written = pipeline_service.export(cfg, path)
    click.echo(f"GenEst table written to {written}")
