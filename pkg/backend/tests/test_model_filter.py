import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from dwp import (
    TOTAL, FilterConfig, FilterThresholds, ModelForm, add_carcasses, build_design, build_rings_circular,
    filter_models, fit_battery, fit_poisson, high_influence_test, mle_psi, model_filter, records_from_distances,
)
from dwp.errors import NoViableModelError
from dwp.model_filter import aicc_pass, ltail_pass, rtail_pass

DEFAULTS = FilterThresholds()


# ==================== SINGLE TESTS ====================

def _exponential_beyond(distance, prob):
    """CDF with exactly prob of its mass beyond distance"""
    return stats.expon(scale=distance / -math.log(prob)).cdf


def test_rtail_boundary():
    assert rtail_pass(_exponential_beyond(200, 0.009), DEFAULTS)
    assert not rtail_pass(_exponential_beyond(200, 0.011), DEFAULTS)


def test_ltail_boundary():
    assert ltail_pass(stats.expon(scale=20 / -math.log(1 - 0.49)).cdf, DEFAULTS)
    assert not ltail_pass(stats.expon(scale=20 / -math.log(1 - 0.51)).cdf, DEFAULTS)


def test_aicc_boundary():
    assert aicc_pass(9.9, DEFAULTS)
    assert aicc_pass(10.0, DEFAULTS)
    assert not aicc_pass(10.1, DEFAULTS)
    assert not aicc_pass(float("nan"), DEFAULTS)


def test_unknown_preset():
    with pytest.raises(ValueError):
        FilterConfig.get_preset("lenient")


def test_thresholds_reject_bad_probability():
    with pytest.raises(ValueError):
        FilterThresholds(rtail=((200.0, 1.5),))


# ==================== SCORE TABLE ====================

@pytest.fixture(scope="module")
def scores(gamma_fits, gamma_profile):
    return filter_models(gamma_fits, gamma_profile)


def test_true_form_passes(scores):
    assert scores[ModelForm.XEP01].passes_all
    assert scores.all_passed
    assert scores[scores.selected].passes_all


def test_constant_fails_extensibility(scores):
    constant = scores["constant"]
    assert constant.extensible == 0
    assert constant.rtail == 0
    assert not constant.passes_all
    assert ModelForm.CONSTANT in scores.non_extensible_models
    assert ModelForm.XEP01 in scores.extensible_models


def test_ranking_is_lexicographic(scores):
    keys = [s.rank_key() for s in scores.scores]
    assert keys == sorted(keys)
    assert scores.scores[-1].form is ModelForm.CONSTANT or not scores.scores[-1].extensible


def test_score_frame(scores):
    frame = scores.to_frame()
    assert list(frame.columns) == ["model", "extensible", "rtail", "ltail", "aicc", "hin", "deltaAICc"]
    assert len(frame) == len(scores.scores)
    assert set(frame["extensible"]) <= {0, 1}


def test_permissive_preset_passes_every_extensible_model(gamma_fits, gamma_profile):
    table = filter_models(gamma_fits, gamma_profile, FilterConfig.get_preset("permissive"))
    extensible_scores = [s for s in table.scores if s.extensible]
    assert extensible_scores
    for score in extensible_scores:
        assert score.passes_all
        assert score.influence.offending_rows == []
    assert table.all_passed


def test_infinite_influence_tolerance_skips_refits(gamma_fits, monkeypatch):
    def refit(*args):
        raise AssertionError("leave-one-out refit should not run")

    monkeypatch.setattr(model_filter, "_refit_without", refit)
    result = high_influence_test(gamma_fits[ModelForm.XEP01], thresholds=FilterConfig.get_preset("permissive"))
    assert result.passed
    assert result.base_p_win == pytest.approx(0.98959, abs=2e-4)


def test_only_non_converged_fits(gamma_fits):
    broken = {form: dataclasses.replace(fit, converged=False) for form, fit in gamma_fits.items()}
    with pytest.raises(NoViableModelError) as err:
        filter_models(broken)
    assert err.value.exit_code == 3


# ==================== HIGH INFLUENCE ====================

def test_influence_within_tolerance(gamma_fits):
    result = high_influence_test(gamma_fits[ModelForm.XEP01])
    assert result.passed
    assert result.base_p_win == pytest.approx(0.98959, abs=2e-4)
    assert 0 < result.max_change < 0.1


def test_influence_with_zero_tolerance(gamma_fits):
    fit = gamma_fits[ModelForm.XEP01]
    strict = DEFAULTS.override(hin_delta_pwin=0.0)
    result = high_influence_test(fit, thresholds=strict)
    assert not result.passed
    assert len(result.offending_rows) == int((fit.design.y > 0).sum())
    assert all(0 < d < 100 for d in result.offending_distances)


def test_far_outlier_is_decisive():
    # eight carcasses within 10 m and one at three times that
    distances = list(range(3, 11)) + [30]
    profile = add_carcasses(build_rings_circular(31), records_from_distances(distances))
    fit = fit_poisson(build_design(profile, ModelForm.XEP02))
    assert fit.converged
    design = fit.design
    outlier = int(np.flatnonzero(design.y > 0).max())
    assert design.x[outlier] == pytest.approx(29.5)

    base = model_filter._p_win(fit.form, fit.distance_beta, design.srad)
    assert base is not None
    converged, ext, p_win = model_filter._refit_without(design, outlier)
    assert converged and ext
    change = abs(p_win - base)
    assert change > 1e-4

    result = high_influence_test(fit, thresholds=DEFAULTS.override(hin_delta_pwin=change / 2))
    assert not result.passed
    assert outlier in result.offending_rows
    assert max(result.offending_distances) == pytest.approx(29.5)
    assert result.max_change >= change


def test_empty_rows_are_never_refit(gamma_fits, monkeypatch):
    fit = gamma_fits[ModelForm.XEP01]
    seen = []
    refit = model_filter._refit_without

    def record(design, row):
        seen.append(row)
        return refit(design, row)

    monkeypatch.setattr(model_filter, "_refit_without", record)
    high_influence_test(fit)
    assert sorted(seen) == list(np.flatnonzero(fit.design.y > 0))


def test_dropping_an_empty_row_keeps_the_flag(gamma_fits):
    fit = gamma_fits[ModelForm.XEP01]
    base = high_influence_test(fit)
    empty = np.flatnonzero(fit.design.y == 0)
    assert len(empty) > 0
    for row in empty[-3:]:
        smaller = fit_poisson(fit.design.drop(int(row)))
        result = high_influence_test(smaller)
        assert result.passed == base.passed
        assert result.base_p_win == pytest.approx(base.base_p_win, abs=0.01)
        assert len(result.offending_rows) == len(base.offending_rows)


# ==================== SELECTION OVER REPLICATES ====================

@pytest.mark.slow
def test_selected_model_narrows_psi():
    truth = stats.gamma(a=1.7744, scale=1 / 0.0355)
    rng = np.random.default_rng(80)
    selected, spread = [], []
    for _ in range(200):
        distances = truth.rvs(100, random_state=rng)
        profile = add_carcasses(build_rings_circular(80), records_from_distances(distances[distances <= 80]))
        fits = {f: fit for f, fit in fit_battery(profile).items() if fit.converged}
        psi = {f: mle_psi(profile, fit)[TOTAL] for f, fit in fits.items()}
        table = filter_models(fits, profile)
        selected.append(psi[table.selected])
        spread.extend(v for v in psi.values() if math.isfinite(v))
    selected = np.array(selected)
    assert np.mean((selected >= 0.70) & (selected <= 0.95)) >= 0.8
    # unfiltered models disagree far more
    assert max(spread) - min(spread) > 0.25
