import click

from dwp.ring_profile import TOTAL

from ..services.pipeline_service import PipelineService
from ..utils.helpers import handle_errors
from ..utils.options import jobs_option, layout_options, out_option, run_config

pipeline_service = PipelineService()


@click.command("prep")
@layout_options
@out_option
@jobs_option
@click.pass_obj
@handle_errors
def prep(obj, **flags):
    """Build ring (or grid) profiles from a layout and carcass table"""
    cfg = run_config(obj, **flags)
    profiles = pipeline_service.prepare(cfg)
    for label, profile in profiles.items():
        prefix = f"[{label}] " if label else ""
        counts = ", ".join(f"{t}: {n}" for t, n in profile.ncarc.items() if t != TOTAL)
        click.echo(f"{prefix}{len(profile.turbines)} turbine(s), srad {profile.srad} m, "
                   f"{profile.ncarc[TOTAL]} carcass(es) ({counts})")
    click.echo(f"Profile written to {cfg.out}")
