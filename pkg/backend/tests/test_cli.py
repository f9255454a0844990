import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import json

import pandas as pd
import pytest
from click.testing import CliRunner

from cli import create_cli

MODELS = "xep01,xep1,xep02,constant"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def cli():
    return create_cli()


def invoke(runner, cli, *args):
    return runner.invoke(cli, ["--log-level", "WARNING", *map(str, args)])


def run_pipeline(runner, cli, carcasses, out, seed=17, *prep_args):
    steps = [
        ("prep", "--carcasses", carcasses, "--srad", 100, "--out", out, *prep_args),
        ("fit", "--models", MODELS, "--out", out),
        ("psi", "--nsim", 200, "--seed", seed, "--out", out),
        ("dwp", "--seed", seed, "--out", out),
        ("export", "--out", out),
    ]
    results = [invoke(runner, cli, *step) for step in steps]
    for step, result in zip(steps, results):
        assert result.exit_code == 0, f"{step[0]}: {result.output}"
    return results


def test_full_pipeline(runner, cli, carcass_csv, tmp_path):
    out = tmp_path / "run"
    prep, fit, psi, dwp, export = run_pipeline(runner, cli, carcass_csv, out)

    assert "198 carcass(es)" in prep.output
    assert "Extensible models:" in fit.output
    assert "Non-extensible models:\n  constant" in fit.output
    assert "Selected model: xep01" in fit.output
    assert json.loads((out / "selected.json").read_text())["selected"] == "xep01"
    assert (out / "stats.csv").exists()
    cdf = pd.read_csv(out / "cdf.csv")
    assert cdf.columns[0] == "x"
    assert "xep01" in cdf.columns and "constant" not in cdf.columns
    assert cdf["x"].max() == 200
    assert cdf["xep01"].is_monotonic_increasing
    assert len(pd.read_csv(out / "psi.csv")) == 200
    assert "GenEst table written to" in export.output

    genest = pd.read_csv(out / "genest.csv")
    assert list(genest.columns) == ["turbine", "dwp"]
    assert list(genest["turbine"]) == ["t1"]
    assert 0.9 < genest["dwp"][0] <= 1.0


def test_pipeline_is_byte_reproducible(runner, cli, carcass_csv, tmp_path):
    run_pipeline(runner, cli, carcass_csv, tmp_path / "a")
    run_pipeline(runner, cli, carcass_csv, tmp_path / "b")
    for name in ("psi.csv", "dwp.csv", "genest.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_refilter_with_other_preset(runner, cli, carcass_csv, tmp_path):
    out = tmp_path / "run"
    assert invoke(runner, cli, "prep", "--carcasses", carcass_csv, "--srad", 100, "--out", out).exit_code == 0
    assert invoke(runner, cli, "fit", "--models", MODELS, "--out", out).exit_code == 0
    result = invoke(runner, cli, "filter", "--filter-preset", "permissive", "--out", out)
    assert result.exit_code == 0
    assert "Selected model:" in result.output
    assert invoke(runner, cli, "filter", "--filter-preset", "lenient", "--out", out).exit_code == 2


def test_carcass_class_strata(runner, cli, gamma_distances, tmp_path):
    path = tmp_path / "classes.csv"
    sizes = ["small" if i % 2 else "large" for i in range(len(gamma_distances))]
    pd.DataFrame({"turbine": "t1", "r": gamma_distances, "size": sizes}).to_csv(path, index=False)
    out = tmp_path / "run"
    run_pipeline(runner, cli, path, out, 17, "--cc-col", "size")

    assert json.loads((out / "strata.json").read_text())["labels"] == ["large", "small"]
    genest = pd.read_csv(out / "genest.csv")
    assert list(genest.columns) == ["turbine", "large", "small"]


def test_missing_distance_column(runner, cli, tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame({"turbine": ["t1"], "dist": [5.0]}).to_csv(path, index=False)
    result = invoke(runner, cli, "prep", "--carcasses", path, "--srad", 50, "--out", tmp_path / "run")
    assert result.exit_code == 2
    assert "Error:" in result.output


def test_carcass_outside_search_radius(runner, cli, carcass_csv, tmp_path):
    result = invoke(runner, cli, "prep", "--carcasses", carcass_csv, "--srad", 40, "--out", tmp_path / "run")
    assert result.exit_code == 2


def test_forced_non_extensible_model(runner, cli, carcass_csv, tmp_path):
    out = tmp_path / "run"
    invoke(runner, cli, "prep", "--carcasses", carcass_csv, "--srad", 100, "--out", out)
    invoke(runner, cli, "fit", "--models", MODELS, "--out", out)
    result = invoke(runner, cli, "psi", "--model", "constant", "--nsim", 10, "--out", out)
    assert result.exit_code == 4


def test_stage_out_of_order(runner, cli, tmp_path):
    result = invoke(runner, cli, "dwp", "--out", tmp_path / "empty")
    assert result.exit_code == 1


def test_unknown_model_name(runner, cli, tmp_path):
    result = invoke(runner, cli, "fit", "--models", "xep99", "--out", tmp_path)
    assert result.exit_code == 2


def test_simulate_scenario_file(runner, cli, tmp_path):
    scenario = tmp_path / "tiny.yaml"
    scenario.write_text(
        "name: tiny\nspecies: bat\nwind: constant_8\nradius: 100\n"
        "replicates: 2\ncarcasses: 30\noracle_size: 2000\nseed: 5\n",
        encoding="utf-8",
    )
    out = tmp_path / "sim"
    result = invoke(runner, cli, "simulate", scenario, "--out", out)
    assert result.exit_code == 0, result.output
    assert "tiny: true psi" in result.output
    summary = pd.read_csv(out / "tiny" / "summary.csv")
    assert list(summary.columns) == ["scenario", "replicate", "true_psi", "found_count", "skipped"]
    assert len(pd.read_csv(out / "tiny" / "carcasses.csv")) == 60


def test_unknown_scenario(runner, cli, tmp_path):
    result = invoke(runner, cli, "simulate", "no_such_scenario", "--out", tmp_path)
    assert result.exit_code == 2


@pytest.mark.slow
def test_simulate_with_pipeline(runner, cli, tmp_path):
    out = tmp_path / "sim"
    result = invoke(runner, cli, "simulate", "bat_constant8_cleared100", "--replicates", 2,
                    "--oracle-size", 20000, "--pipeline", "--out", out)
    assert result.exit_code == 0, result.output
    accuracy = pd.read_csv(out / "bat_constant8_cleared100" / "psi_accuracy.csv")
    assert "selected" in set(accuracy["model"])


def test_version(runner, cli):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "dwp" in result.output
