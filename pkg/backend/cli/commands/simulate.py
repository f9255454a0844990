from pathlib import Path

import click

from dwp.ballistics_sim import ScenarioConfig
from dwp.errors import SchemaError

from ..config import Config
from ..services.pipeline_service import PipelineService
from ..utils.helpers import echo_table, handle_errors
from ..utils.options import jobs_option, out_option, seed_option

pipeline_service = PipelineService()

SCENARIO_DIR = Path(__file__).resolve().parent.parent.parent / "config" / "scenarios"


def _resolve(name: str) -> Path:
    """A path, or the stem of a bundled scenario file"""
    path = Path(name)
    if path.exists():
        return path
    bundled = SCENARIO_DIR / f"{name}.yaml"
    if bundled.exists():
        return bundled
    raise SchemaError(f"Unknown scenario: {name}", column="scenario")


@click.command("simulate")
@click.argument("scenarios", nargs=-1, required=True)
@click.option("--replicates", type=int, default=None, help="Override the replicate count")
@click.option("--oracle-size", type=int, default=None, help="Override the oracle sample size")
@click.option("--pipeline", is_flag=True, help="Fit every replicate and compare psi with the oracle")
@click.option("--verbose", is_flag=True, help="Show progress bars")
@seed_option
@out_option
@jobs_option
@click.pass_obj
@handle_errors
def simulate(obj, scenarios, replicates, oracle_size, pipeline, verbose, seed, out, n_jobs):
    """Run ballistics scenarios (YAML files or bundled scenario names)"""
    out = Path(out or "dwp_sim")
    n_jobs = n_jobs or Config.N_JOBS
    for name in scenarios:
        scenario = ScenarioConfig.from_yaml(_resolve(name))
        update = {k: v for k, v in (("replicates", replicates), ("oracle_size", oracle_size),
                                    ("seed", seed)) if v is not None}
        if update:
            scenario = scenario.model_copy(update=update)
        result, accuracy = pipeline_service.simulate(scenario, out, pipeline, n_jobs, verbose)
        kept = len(result.kept_replicates)
        click.echo(f"{scenario.label}: true psi {result.true_psi:.4f}, "
                   f"{kept} of {scenario.replicates} replicate(s) kept")
        if accuracy is not None:
            echo_table(accuracy)
    click.echo(f"Simulation output written to {out}")
