import click

from dwp.distance_distributions import extensible

from ..services.pipeline_service import PipelineService
from ..utils.helpers import echo_table, handle_errors
from ..utils.options import filter_option, jobs_option, model_list_option, out_option, run_config

pipeline_service = PipelineService()


def _echo_model_lists(fits):
    ext = [f.value for f, fit in fits.items() if fit.converged and extensible(f, fit.distance_beta)]
    non_ext = [f.value for f in fits if f.value not in ext]
    click.echo("Extensible models:")
    for name in ext:
        click.echo(f"  {name}")
    click.echo("")
    click.echo("Non-extensible models:")
    for name in non_ext:
        click.echo(f"  {name}")


def _echo_selection(table):
    echo_table(table.to_frame())
    status = "passes every test" if table.all_passed else "best partial match"
    click.echo(f"Selected model: {table.selected.value} ({status})")


@click.command("fit")
@model_list_option
@filter_option
@out_option
@jobs_option
@click.pass_obj
@handle_errors
def fit(obj, **flags):
    """Fit the model battery, score it and pick a model"""
    cfg = run_config(obj, **flags)
    for label, (fits, table, stats) in pipeline_service.fit(cfg).items():
        if label:
            click.echo(f"== {label} ==")
        _echo_model_lists(fits)
        click.echo("")
        echo_table(stats)
        click.echo("")
        _echo_selection(table)


@click.command("filter")
@filter_option
@out_option
@jobs_option
@click.pass_obj
@handle_errors
def filter_cmd(obj, **flags):
    """Re-score saved fits, e.g. under a different threshold preset"""
    cfg = run_config(obj, **flags)
    for label, table in pipeline_service.refilter(cfg).items():
        if label:
            click.echo(f"== {label} ==")
        _echo_selection(table)
