import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import numpy as np
import pandas as pd
import pytest

from dwp import (
    TOTAL, DwpDraws, ModelForm, PsiDraws, combine_genest, credible_interval, dwp_summary, est_dwp,
    est_psi, export_genest, format_genest, from_fit, mle_psi, posterior_m,
)
from dwp.coverage_estimation import MAX_MISSED, sample_m
from dwp.errors import InvalidArgumentError, NotExtensibleError


# ==================== POSTERIOR OF M ====================

def test_posterior_two_found_at_twenty_percent():
    support, pmf = posterior_m(2, 0.2)
    assert support[0] == 2
    assert pmf.sum() == pytest.approx(1.0)
    cdf = dict(zip(support, np.cumsum(pmf)))
    assert cdf[3] == pytest.approx(0.052414, abs=1e-5)
    assert cdf[25] == pytest.approx(0.948848, abs=1e-5)
    assert cdf[26] == pytest.approx(0.956979, abs=1e-5)
    assert support[np.argmax(pmf)] == 8
    assert pmf.max() == pytest.approx(0.068692, abs=1e-5)
    assert credible_interval(support, pmf, 0.9) == (4, 26)


def test_posterior_mode_half_coverage():
    support, pmf = posterior_m(5, 0.5)
    assert support[np.argmax(pmf)] in (9, 10)


def test_full_coverage_is_a_point_mass():
    support, pmf = posterior_m(7, 1.0)
    assert list(support) == [7]
    assert credible_interval(support, pmf) == (7, 7)


@pytest.mark.parametrize("m_in, psi", [(-1, 0.5), (2.5, 0.5), (3, 0.0), (3, 1.2), (3, float("nan"))])
def test_posterior_rejects_bad_arguments(m_in, psi):
    with pytest.raises(InvalidArgumentError):
        posterior_m(m_in, psi)


def test_credible_interval_level():
    support, pmf = posterior_m(2, 0.2)
    with pytest.raises(InvalidArgumentError):
        credible_interval(support, pmf, 1.0)
    narrow = credible_interval(support, pmf, 0.5)
    assert 4 <= narrow[0] <= narrow[1] <= 26


def test_sampled_m_follows_posterior():
    rng = np.random.default_rng(5)
    draws = sample_m(2, np.full(20000, 0.2), rng)
    support, pmf = posterior_m(2, 0.2)
    assert draws.min() >= 2
    assert draws.mean() == pytest.approx(float(np.sum(support * pmf)), rel=0.03)
    assert np.isnan(sample_m(2, np.array([np.nan]), rng)[0])


def test_tiny_coverage_keeps_the_support_bounded():
    support, pmf = posterior_m(5, 1e-9)
    assert len(support) <= MAX_MISSED + 1
    assert pmf.sum() == pytest.approx(1.0)

    rng = np.random.default_rng(8)
    draws = sample_m(5, np.array([0.5, 1e-9]), rng)
    assert 5 <= draws[0] < 100
    assert 1e8 < draws[1] < 1e11


def test_tiny_coverage_uses_gamma_limit():
    # M * psi ~ Gamma(m_in + 1/2) as psi goes to 0
    draws = sample_m(5, np.full(20000, 1e-7), np.random.default_rng(9))
    assert np.mean(draws * 1e-7) == pytest.approx(5.5, rel=0.02)
    assert draws.min() >= 5


# ==================== PSI ====================

@pytest.fixture(scope="module")
def psi_draws(gamma_fits, gamma_profile):
    return est_psi(gamma_profile, gamma_fits[ModelForm.XEP01], nsim=200, seed=42)


def test_first_psi_draw_is_the_fit(psi_draws, gamma_fits, gamma_profile):
    fit = gamma_fits[ModelForm.XEP01]
    expected = from_fit(fit).cdf(100.0)
    assert psi_draws.draws.shape == (200, 2)
    assert psi_draws.mle()[TOTAL] == pytest.approx(expected, abs=1e-9)
    assert psi_draws.mle()["site"] == pytest.approx(expected, abs=1e-9)
    assert mle_psi(gamma_profile, fit)[TOTAL] == pytest.approx(expected, abs=1e-9)


def test_psi_draws_are_reproducible(psi_draws, gamma_fits, gamma_profile):
    again = est_psi(gamma_profile, gamma_fits[ModelForm.XEP01], nsim=200, seed=42)
    pd.testing.assert_frame_equal(psi_draws.draws, again.draws)
    values = psi_draws.draws[TOTAL]
    assert values.between(0.0, 1.0).all()
    assert values.median() == pytest.approx(0.9896, abs=0.01)


def test_psi_needs_extensible_model(gamma_fits, gamma_profile):
    with pytest.raises(NotExtensibleError):
        est_psi(gamma_profile, gamma_fits[ModelForm.CONSTANT], nsim=10, seed=1)
    with pytest.raises(InvalidArgumentError):
        est_psi(gamma_profile, gamma_fits[ModelForm.XEP01], nsim=0)


# ==================== DWP ====================

def _psi(values, units=("t1", TOTAL)):
    return PsiDraws(draws=pd.DataFrame({u: values for u in units}), form=ModelForm.XEP01)


def test_dwp_is_bounded_by_one(psi_draws, gamma_profile):
    dwp = est_dwp(psi_draws, gamma_profile.ncarc, seed=9)
    values = dwp.draws[TOTAL].to_numpy()
    assert np.all((values > 0) & (values <= 1))
    # 198 found at psi near 0.99 leaves little room for misses
    assert np.median(values) == pytest.approx(0.99, abs=0.02)
    again = est_dwp(psi_draws, gamma_profile.ncarc, seed=9)
    pd.testing.assert_frame_equal(dwp.draws, again.draws)


def test_zero_carcasses_fall_back_to_psi():
    psi = _psi([0.4, 0.5, 0.6])
    dwp = est_dwp(psi, {"t1": 0, TOTAL: 0}, seed=1)
    assert list(dwp.draws["t1"]) == [0.4, 0.5, 0.6]
    assert dwp.zero_count_units == ("t1", TOTAL)


def test_dwp_survives_near_zero_psi_draws():
    dwp = est_dwp(_psi([0.5, 1e-9]), {"t1": 5, TOTAL: 5}, seed=1)
    values = dwp.draws["t1"].to_numpy()
    assert np.all(np.isfinite(values))
    assert 0 < values[1] < 1e-7


def test_dwp_needs_every_count():
    with pytest.raises(InvalidArgumentError):
        est_dwp(_psi([0.5]), {"t1": 3}, seed=1)


def test_dwp_summary_columns(psi_draws):
    summary = dwp_summary(psi_draws)
    assert list(summary.columns) == ["unit", "5%", "50%", "95%", "mean"]
    assert list(summary["unit"]) == ["site", TOTAL]


# ==================== GENEST EXPORT ====================

@pytest.fixture
def two_turbines():
    frame = pd.DataFrame({"t1": [0.5, 0.6, 0.7], "t2": [0.2, 0.3, 0.4], TOTAL: [0.3, 0.4, 0.5]})
    return DwpDraws(draws=frame, ncarc={"t1": 3, "t2": 1, TOTAL: 4}, form=ModelForm.XEP01)


def test_point_export(two_turbines):
    table = format_genest(two_turbines, "point")
    assert list(table.columns) == ["turbine", "dwp"]
    assert list(table["turbine"]) == ["t1", "t2"]
    assert list(table["dwp"]) == [0.6, 0.3]


def test_simulated_export(two_turbines):
    table = format_genest(two_turbines, "simulated")
    assert len(table) == 6
    assert list(table["turbine"][:2]) == ["t1", "t2"]
    assert list(table["dwp"][:4]) == [0.5, 0.2, 0.6, 0.3]


def test_carcass_class_columns(two_turbines):
    table = format_genest({"small": two_turbines, "large": two_turbines})
    assert list(table.columns) == ["turbine", "large", "small"]


def test_export_is_byte_stable(two_turbines, tmp_path):
    table = format_genest(two_turbines, "point", round_digits=3)
    first = export_genest(table, tmp_path / "a.csv")
    second = export_genest(table, tmp_path / "b.csv")
    assert first.read_text(encoding="utf-8").splitlines()[0] == "turbine,dwp"
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text(encoding="utf-8").splitlines()[1] == "t1,0.600"


def test_combine_needs_matching_columns(two_turbines):
    point = format_genest(two_turbines)
    combined = combine_genest([point, point])
    assert len(combined) == 4
    with pytest.raises(InvalidArgumentError):
        combine_genest([point, point.rename(columns={"dwp": "other"})])
    with pytest.raises(InvalidArgumentError):
        combine_genest([])


def test_export_rounding(two_turbines):
    frame = two_turbines.draws.copy()
    frame["t1"] = [1 / 3, 1 / 3, 1 / 3]
    table = format_genest(DwpDraws(frame, two_turbines.ncarc, ModelForm.XEP01), round_digits=2)
    assert table["dwp"][0] == 0.33
    assert not math.isnan(table["dwp"][1])
