import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import numpy as np
import pytest

from dwp import (
    BallisticsConfig, CarcassAero, DetectionParams, FlightMode, ScenarioConfig, Species, TurbineSpec,
    initial_velocity, integrate_trajectory, run_scenario, sample_strike, simulate_detection_process,
    simulate_landings, wind_at_height,
)
from dwp.ballistics_sim import Strike, sample_wind, true_psi
from dwp.errors import InvalidArgumentError, SchemaError, SimulationError

BAT = CarcassAero.for_species(Species.BAT)
EAGLE = CarcassAero.for_species(Species.EAGLE)


# ==================== WIND & STRIKE ====================

def test_wind_profile():
    assert wind_at_height(80.0, 8.0) == pytest.approx(8.0)
    assert wind_at_height(40.0, 8.0) == pytest.approx(6.869, abs=1e-3)
    # ground level uses the guard height instead of zero
    assert wind_at_height(0.0, 8.0) > 0


def test_wind_regimes():
    rng = np.random.default_rng(0)
    assert np.all(sample_wind(BallisticsConfig.get_wind_regime("constant_8"), 5, rng) == 8.0)
    with pytest.raises(InvalidArgumentError):
        sample_wind(BallisticsConfig.get_wind_regime("constant_3"), 5, rng)
    moderate = sample_wind(BallisticsConfig.get_wind_regime("moderate"), 5000, rng)
    assert moderate.min() >= 3.5 and moderate.max() <= 20.0
    assert np.median(moderate) == pytest.approx(7.2, abs=0.3)
    high = sample_wind(BallisticsConfig.get_wind_regime("weibull_high"), 5000, rng)
    assert high.min() >= 3.5
    assert high.mean() == pytest.approx(9.2, abs=0.3)


def test_weibull_parameters_match_moments():
    shape, scale = BallisticsConfig.get_wind_regime("weibull_low").weibull_parameters()
    mean = scale * math.gamma(1 + 1 / shape)
    sd = scale * math.sqrt(math.gamma(1 + 2 / shape) - math.gamma(1 + 1 / shape) ** 2)
    assert mean == pytest.approx(5.32)
    assert sd == pytest.approx(2.78)


def test_strike_sampling():
    rng = np.random.default_rng(1)
    strike = sample_strike(TurbineSpec(), rng, 10000)
    assert strike.radius.max() <= 45.0
    assert np.mean(strike.radius) == pytest.approx(22.5, rel=0.03)
    by_area = sample_strike(TurbineSpec(), rng, 10000, uniform_in="area")
    assert np.mean(by_area.radius) == pytest.approx(30.0, rel=0.03)
    with pytest.raises(InvalidArgumentError):
        sample_strike(TurbineSpec(), rng, 5, uniform_in="volume")


def test_tip_velocity_is_tangential():
    top = Strike(radius=np.array([45.0]), azimuth=np.array([math.pi / 2]))
    vel = initial_velocity(top, 12.0)
    assert np.allclose(vel[0], [-72.0, 0.0, 0.0], atol=1e-9)
    with pytest.raises(InvalidArgumentError):
        initial_velocity(top, 12.0, FlightMode.VARIABLE)
    moving = initial_velocity(top, 12.0, FlightMode.VARIABLE, np.random.default_rng(2))
    assert abs(moving[0, 1]) <= BallisticsConfig.FLIGHT_SPEED


# ==================== TRAJECTORIES ====================

def test_still_air_drop_time():
    landing = integrate_trajectory([0.0, 0.0, 91.4], [0.0, 0.0, 0.0], BAT, 0.0)
    assert landing.time == pytest.approx(11.008, abs=0.05)
    assert landing.distance == pytest.approx(0.0, abs=1e-9)


def test_bat_thrown_from_blade_tip():
    landing = integrate_trajectory([0.0, 0.0, 125.0], [-72.0, 0.0, 0.0], BAT, 12.0)
    assert 120.0 < landing.distance < 220.0
    assert landing.w > 0
    assert landing.x < 0


def test_eagle_thrown_from_blade_tip():
    landing = integrate_trajectory([0.0, 0.0, 125.0], [-24.0, 0.0, 0.0], EAGLE, 4.0)
    assert 50.0 < landing.distance < 90.0
    # heavier carcasses fall faster
    bat = integrate_trajectory([0.0, 0.0, 125.0], [-24.0, 0.0, 0.0], BAT, 4.0)
    assert landing.time < bat.time


@pytest.mark.parametrize("aero, s0, v0, wind", [
    (BAT, [0.0, 0.0, 80.0], [0.0, 0.0, 0.0], 8.0),
    (BAT, [0.0, 0.0, 125.0], [0.0, 0.0, 0.0], 12.0),
    (EAGLE, [0.0, 0.0, 80.0], [0.0, 0.0, 0.0], 8.0),
    (EAGLE, [0.0, 0.0, 35.0], [0.0, 0.0, 0.0], 4.0),
])
def test_halving_the_step_barely_moves_the_landing(aero, s0, v0, wind):
    coarse = integrate_trajectory(s0, v0, aero, wind, dt=0.01)
    fine = integrate_trajectory(s0, v0, aero, wind, dt=0.005)
    assert abs(coarse.distance - fine.distance) < 0.05


def test_landing_distance_grows_with_wind():
    distances = [integrate_trajectory([0.0, 0.0, 100.0], [-20.0, 0.0, 0.0], BAT, w).distance
                 for w in (4.0, 8.0, 12.0, 16.0)]
    assert np.all(np.diff(distances) >= 0)


def test_hub_drop_stays_in_the_downwind_plane():
    landing = integrate_trajectory([0.0, 0.0, 80.0], [0.0, 0.0, 0.0], BAT, 10.0)
    assert landing.x == pytest.approx(0.0, abs=1e-9)
    assert landing.w > 0


def test_trajectory_must_start_airborne():
    with pytest.raises(SimulationError):
        integrate_trajectory([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], BAT, 8.0)


def test_landings_frame():
    scenario = ScenarioConfig(species="bat", wind="constant_8")
    frame = simulate_landings(200, scenario, np.random.default_rng(3))
    assert list(frame.columns) == ["x", "y", "distance", "cross", "downwind", "wind_speed", "time"]
    assert np.allclose(np.hypot(frame["x"], frame["y"]), frame["distance"])
    assert frame["time"].min() > 0


# ==================== SCENARIOS ====================

def test_scenario_yaml(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text("species: eagle\nwind: weibull_low\nplot: road_pad\nradius: 50\n", encoding="utf-8")
    scenario = ScenarioConfig.from_yaml(path)
    assert scenario.species is Species.EAGLE
    assert scenario.plot_row.shape.value == "RP"
    assert scenario.label == "eagle_weibull_low_zero_road_pad50"


@pytest.mark.parametrize("body, column", [
    ("wind: hurricane\n", "wind"),
    ("radius: -5\n", "radius"),
    ("strike_sampling: volume\n", "strike_sampling"),
])
def test_scenario_yaml_errors(tmp_path, body, column):
    path = tmp_path / "scenario.yaml"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(SchemaError) as err:
        ScenarioConfig.from_yaml(path)
    assert err.value.details["column"] == column


def test_missing_scenario_file(tmp_path):
    with pytest.raises(SchemaError):
        ScenarioConfig.from_yaml(tmp_path / "nope.yaml")


def test_small_scenario_run():
    scenario = ScenarioConfig(species="bat", wind="constant_8", radius=100, replicates=3,
                              carcasses=50, oracle_size=5000, seed=11)
    result = run_scenario(scenario)
    assert len(result.carcasses) == 150
    assert list(result.summary.columns) == ["replicate", "found_count", "skipped"]
    assert result.summary["found_count"].sum() == int(result.carcasses["found"].sum())
    assert 0 < result.true_psi <= 1
    again = run_scenario(scenario)
    assert result.true_psi == again.true_psi
    assert result.carcasses.equals(again.carcasses)
    assert len(result.replicate(2)) == 50


def test_sparse_replicates_are_skipped():
    scenario = ScenarioConfig(species="bat", wind="constant_8", radius=5, replicates=2,
                              carcasses=20, min_found=21, oracle_size=1000, seed=4)
    result = run_scenario(scenario)
    assert result.summary["skipped"].all()
    assert result.kept_replicates == []


@pytest.mark.slow
def test_eagle_landings_spread_out():
    scenario = ScenarioConfig(species="eagle", wind="constant_4")
    distance = simulate_landings(20000, scenario, np.random.default_rng(5))["distance"]
    q10, q50 = np.quantile(distance, [0.1, 0.5])
    assert q10 / q50 > 0.2


@pytest.mark.slow
def test_bat_landings_avoid_the_tower():
    scenario = ScenarioConfig(species="bat", wind="moderate")
    distance = simulate_landings(20000, scenario, np.random.default_rng(6))["distance"]
    assert np.mean(distance < 5) < 0.01


@pytest.mark.slow
def test_oracle_psi_grows_with_plot_radius():
    small = true_psi(ScenarioConfig(radius=50, oracle_size=20000), seed=8)
    large = true_psi(ScenarioConfig(radius=150, oracle_size=20000), seed=8)
    assert small < large <= 1


# ==================== DETECTION ====================

def test_perfect_searches_find_every_carcass_in_plot():
    params = DetectionParams(se_first=1.0, persistence_scale=math.inf)
    in_plot = np.arange(100) % 3 != 0
    result = simulate_detection_process(np.ones(100), params, rng=7, in_plot=in_plot)
    assert np.array_equal(result.found, in_plot)
    assert np.all(result.search[in_plot] >= 1)


def test_blind_searchers_find_nothing():
    result = simulate_detection_process(np.ones(50), DetectionParams(se_first=0.0), rng=7)
    assert result.n_found == 0
    assert np.all(result.search == 0)


def test_searcher_efficiency_decays():
    params = DetectionParams()
    assert params.searcher_efficiency(1) == pytest.approx(0.8)
    assert params.searcher_efficiency(3) == pytest.approx(0.8 * 0.75 ** 2)
