import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from dwp import (
    CarcassRecord, ModelForm, TOTAL, add_carcasses, aicc_table, build_design, build_rings_circular, build_rings_polygon,
    fit_battery, fit_poisson, read_polygon_table, records_from_distances, simulate_coefficients,
)
from dwp.errors import DegenerateInputError
from dwp.glm_engine import FittedGLM, delta_aicc, log_likelihood, score


def test_design_columns_and_offset(gamma_profile):
    design = build_design(gamma_profile, ModelForm.XEP01)
    assert design.template.column_names == ["a", "b0", "b1"]
    assert design.n_obs == 100
    assert design.x[0] == pytest.approx(0.5)
    assert design.offset[0] == pytest.approx(math.log(math.pi))
    assert design.y.sum() == 198


def test_xep01_recovers_gamma(gamma_fits):
    fit = gamma_fits[ModelForm.XEP01]
    assert fit.converged
    b0, b1 = fit.distance_beta
    assert b0 == pytest.approx(2.0, abs=0.05)
    assert b1 == pytest.approx(-0.1, abs=0.003)
    assert math.sqrt(fit.cov[1, 1]) == pytest.approx(0.423, rel=0.05)


def test_fit_is_a_likelihood_maximum(gamma_fits):
    fit = gamma_fits[ModelForm.XEP01]
    design = fit.design
    assert np.allclose(score(design, fit.beta), 0.0, atol=1e-4)
    nudged = fit.beta + np.array([0.0, 0.0, 0.001])
    assert log_likelihood(design, nudged) < fit.loglik


def test_aicc_ranks_true_form_above_fixed_shape(gamma_fits):
    deltas = delta_aicc(gamma_fits)
    assert deltas[ModelForm.XEP01] < deltas[ModelForm.XEP1]
    assert min(d for d in deltas.values() if math.isfinite(d)) == 0.0

    table = aicc_table(gamma_fits)
    assert list(table.columns[:6]) == ["model", "k", "loglik", "AICc", "deltaAICc", "converged"]
    assert table["AICc"].is_monotonic_increasing


def test_tied_aicc_has_a_single_best_model(gamma_fits):
    fit = gamma_fits[ModelForm.XEP01]
    tied = {ModelForm.XEP1: replace(fit, form=ModelForm.XEP1), ModelForm.XEP01: fit,
            ModelForm.XEP12: replace(fit, form=ModelForm.XEP12)}
    deltas = delta_aicc(tied)
    # ties go to the first form name
    assert deltas[ModelForm.XEP01] == 0.0
    assert list(deltas.values()).count(0.0) == 1
    assert 0.0 < deltas[ModelForm.XEP1] < 1e-300
    assert 0.0 < deltas[ModelForm.XEP12] < 1e-300


def test_aicc_small_sample_correction(gamma_fits):
    fit = gamma_fits[ModelForm.XEP01]
    k, n = fit.k_params, fit.n_obs
    assert fit.aicc == pytest.approx(-2 * fit.loglik + 2 * k + 2 * k * (k + 1) / (n - k - 1))


def test_constant_model_fits_intercept_only(gamma_fits):
    fit = gamma_fits[ModelForm.CONSTANT]
    assert fit.converged
    assert fit.k_params == 1
    assert len(fit.distance_beta) == 0
    # the intercept is the overall carcass density
    assert math.exp(fit.beta[0]) == pytest.approx(198 / (math.pi * 100 ** 2), rel=1e-6)


def test_no_carcasses():
    with pytest.raises(DegenerateInputError):
        fit_battery(build_rings_circular(50), [ModelForm.XEP1])


def test_battery_skips_underdetermined_forms():
    profile = add_carcasses(build_rings_circular(3), records_from_distances([1.5, 2.5]))
    fits = fit_battery(profile, [ModelForm.XEP1, ModelForm.XEP0123])
    assert ModelForm.XEP0123 not in fits
    assert ModelForm.XEP1 in fits


def test_search_class_adds_intercepts(gamma_distances):
    half = 100
    left = [{"turbine": "t1", "x": x, "y": y, "sc": "easy"}
            for x, y in [(-half, -half), (0, -half), (0, half), (-half, half)]]
    right = [{"turbine": "t1", "x": x, "y": y, "sc": "hard"}
             for x, y in [(0, -half), (half, -half), (half, half), (0, half)]]
    layout = read_polygon_table(pd.DataFrame(left + right), class_col="sc")
    profile = build_rings_polygon(layout, n_angles=720, n_radial=2)
    records = [CarcassRecord(turbine="t1", x=-d / 2, y=d / 2) for d in gamma_distances[::4]]
    records += [CarcassRecord(turbine="t1", x=d / 2, y=d / 2) for d in gamma_distances[1::8]]
    profile = add_carcasses(profile, records)
    design = build_design(profile, ModelForm.XEP01)
    assert design.template.column_names == ["a", "schard", "b0", "b1"]
    fit = fit_poisson(design)
    assert fit.converged
    # half as many carcasses per unit area in the hard class
    assert fit.beta[1] == pytest.approx(math.log(0.5), abs=0.35)


def test_coefficient_draws_are_seeded(gamma_fits):
    fit = gamma_fits[ModelForm.XEP01]
    first = simulate_coefficients(fit, 500, seed=7)
    second = simulate_coefficients(fit, 500, seed=7)
    assert first.shape == (500, 3)
    assert np.array_equal(first, second)
    se = np.sqrt(np.diag(fit.cov) / 500)
    assert np.all(np.abs(first.mean(axis=0) - fit.beta) <= 4 * se)


def test_fit_serialization_keeps_coefficients(gamma_fits):
    fit = gamma_fits[ModelForm.XEP02]
    loaded = FittedGLM.from_dict(fit.to_dict())
    assert loaded.form is ModelForm.XEP02
    assert np.array_equal(loaded.beta, fit.beta)
    assert np.array_equal(loaded.cov, fit.cov)
    assert loaded.design is None


def test_ring_profile_total_matches_turbine(gamma_profile):
    assert gamma_profile.ncarc[TOTAL] == gamma_profile.ncarc["site"] == 198


@pytest.mark.parametrize("factor", [0.01, 7.5])
def test_exposure_scale_only_moves_intercept(gamma_fits, factor):
    fit = gamma_fits[ModelForm.XEP01]
    scaled = fit_poisson(replace(fit.design, offset=fit.design.offset + math.log(factor)))
    assert scaled.converged
    assert scaled.beta[0] == pytest.approx(fit.beta[0] - math.log(factor), abs=1e-6)
    assert np.allclose(scaled.distance_beta, fit.distance_beta, rtol=1e-6, atol=1e-9)
    assert scaled.loglik == pytest.approx(fit.loglik, abs=1e-6)
