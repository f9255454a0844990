import click

from dwp.config.enums import ExportMode, LayoutType

from ..config import load_run_config


def out_option(f):
    return click.option("--out", type=click.Path(file_okay=False), default=None,
                        help="Pipeline output directory")(f)


def seed_option(f):
    return click.option("--seed", type=int, default=None, help="Random seed")(f)


def jobs_option(f):
    return click.option("--n-jobs", "n_jobs", type=int, default=None, help="Parallel workers")(f)


def layout_options(f):
    options = [
        click.option("--layout-type", type=click.Choice([t.value for t in LayoutType]), default=None),
        click.option("--layout", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Layout file (simple CSV, polygon CSV/GeoJSON or grid CSV)"),
        click.option("--carcasses", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Carcass table"),
        click.option("--srad", type=float, default=None, help="Search radius (m)"),
        click.option("--sc-var", "sc_var", default=None, help="Search class column"),
        click.option("--not-searched", "not_searched", multiple=True,
                     help="Search class treated as unsearched (repeatable)"),
        click.option("--cc-col", "cc_col", default=None, help="Carcass class column to stratify by"),
        click.option("--cell-size", type=float, default=None, help="Grid cell size (m)"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def model_list_option(f):
    return click.option("--models", multiple=True,
                        help="Model forms to fit, repeatable or comma-separated")(f)


def filter_option(f):
    return click.option("--filter-preset", default=None, help="Filter threshold preset")(f)


def export_options(f):
    f = click.option("--round", "round_digits", type=int, default=None, help="Digits kept in dwp")(f)
    return click.option("--mode", type=click.Choice([m.value for m in ExportMode]), default=None)(f)


def split_models(values):
    names = [name.strip() for value in values or () for name in value.split(",")]
    return tuple(name for name in names if name)


def run_config(obj, **overrides):
    """RunConfig from the group's --config file plus this command's flags"""
    if "models" in overrides:
        overrides["models"] = list(split_models(overrides["models"])) or None
    if overrides.get("not_searched"):
        overrides["not_searched"] = list(overrides["not_searched"])
    return load_run_config((obj or {}).get("config"), overrides)
