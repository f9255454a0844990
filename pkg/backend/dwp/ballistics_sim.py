"""Carcass deposition simulator.

A carcass struck by a blade leaves the rotor with the blade's velocity (plus
part of its own flight velocity) and falls under gravity and quadratic drag
relative to a sheared horizontal wind. Coordinates of a trajectory are
(x, w, y): x along the rotor plane, w downwind, y up; the turbine base is the
origin. Landings are rotated onto the ground by a uniform wind direction.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from joblib import Parallel, delayed
from pydantic import BaseModel, Field, ValidationError, field_validator
from tqdm import tqdm

from .config.ballistics_config import (
    BallisticsConfig, CarcassAero, DetectionParams, TurbineSpec, WindRegime,
)
from .config.enums import FlightMode, PlotKind, PlotShape, Species, WindKind
from .errors import InvalidArgumentError, SchemaError, SimulationError
from .layouts import SimpleGeometryRow
from .ring_geometry import plot_contains

logger = logging.getLogger(__name__)

DT = 0.01            # s
MAX_STEPS = 1_000_000
GROUND_GUARD = 0.1   # m, wind below this height is taken at this height
ORACLE_CHUNK = 100_000


# ==================== WIND & STRIKE ====================

def wind_at_height(y, w_n, rotor: TurbineSpec = TurbineSpec()):
    """Power-law wind profile anchored at nacelle height"""
    y = np.asarray(y, dtype=float)
    y = np.where(y > 0, y, GROUND_GUARD)
    return w_n * (y / rotor.nacelle_height) ** rotor.hellman


@dataclass
class Strike:
    radius: np.ndarray
    azimuth: np.ndarray
    rotor: TurbineSpec = field(default_factory=TurbineSpec)

    @property
    def height(self) -> np.ndarray:
        return self.rotor.nacelle_height + self.radius * np.sin(self.azimuth)

    @property
    def offset(self) -> np.ndarray:
        """In-plane horizontal offset from the tower"""
        return self.radius * np.cos(self.azimuth)


def sample_strike(rotor: TurbineSpec, rng, size: Optional[int] = None, uniform_in: str = "radius") -> Strike:
    """Strike point uniform along the blade (or over the swept disc)"""
    u = rng.random(size)
    if uniform_in == "radius":
        radius = rotor.blade_length * u
    elif uniform_in == "area":
        radius = rotor.blade_length * np.sqrt(u)
    else:
        raise InvalidArgumentError(f"Strike sampling must be 'radius' or 'area', got '{uniform_in}'")
    azimuth = rng.uniform(0.0, 2 * math.pi, size)
    return Strike(radius=np.asarray(radius, dtype=float), azimuth=np.asarray(azimuth, dtype=float), rotor=rotor)


def initial_velocity(strike: Strike, wind_speed, mode: FlightMode = FlightMode.ZERO,
                     rng=None, flight_speed: float = BallisticsConfig.FLIGHT_SPEED) -> np.ndarray:
    """(n, 3) velocity (vx, vw, vy) right after the strike"""
    rotor = strike.rotor
    radius = np.atleast_1d(strike.radius)
    azimuth = np.atleast_1d(strike.azimuth)
    blade = rotor.tip_speed_ratio * np.asarray(wind_speed, dtype=float) * radius / rotor.blade_length
    # tangent to the rotor circle
    vel = np.column_stack([-blade * np.sin(azimuth), np.zeros_like(blade), blade * np.cos(azimuth)])
    if mode is FlightMode.VARIABLE:
        if rng is None:
            raise InvalidArgumentError("Variable flight mode needs a random generator")
        heading = rng.uniform(0.0, 2 * math.pi, len(radius))
        # the in-plane component is lost on impact
        vel[:, 1] += flight_speed * np.sin(heading)
    return vel


# ==================== TRAJECTORIES ====================

def _acceleration(y, v, wind_n, drag, rotor):
    rel = v.copy()
    rel[:, 1] -= wind_at_height(y, wind_n, rotor)
    speed = np.linalg.norm(rel, axis=1)
    acc = -drag * rel * speed[:, None]
    acc[:, 2] -= rotor.gravity
    return acc


def _integrate(pos: np.ndarray, vel: np.ndarray, wind_n: np.ndarray, aero: CarcassAero,
               rotor: TurbineSpec, dt: float = DT, max_steps: int = MAX_STEPS):
    """Fixed-step explicit Euler until each carcass reaches the ground

    Returns landing (x, w) and flight time, interpolated to y = 0.
    """
    pos = np.array(pos, dtype=float, ndmin=2)
    vel = np.array(vel, dtype=float, ndmin=2)
    wind_n = np.broadcast_to(np.asarray(wind_n, dtype=float), (len(pos),)).copy()
    if np.any(pos[:, 2] <= 0):
        raise SimulationError("Trajectories must start above the ground")
    n = len(pos)
    land = np.empty((n, 2))
    times = np.empty(n)
    active = np.arange(n)
    drag = aero.drag
    t = 0.0
    for _ in range(max_steps):
        acc = _acceleration(pos[:, 2], vel, wind_n, drag, rotor)
        new_pos = pos + vel * dt
        vel = vel + acc * dt
        t += dt
        landed = new_pos[:, 2] <= 0
        if landed.any():
            before, after = pos[landed], new_pos[landed]
            frac = before[:, 2] / (before[:, 2] - after[:, 2])
            land[active[landed]] = before[:, :2] + frac[:, None] * (after[:, :2] - before[:, :2])
            times[active[landed]] = t - dt + frac * dt
            keep = ~landed
            active, new_pos, vel, wind_n = active[keep], new_pos[keep], vel[keep], wind_n[keep]
        pos = new_pos
        if not len(active):
            return land, times
    raise SimulationError(f"{len(active)} trajectory(ies) still airborne after {max_steps} steps")


@dataclass
class Landing:
    x: float
    w: float
    time: float

    @property
    def distance(self) -> float:
        return math.hypot(self.x, self.w)


def integrate_trajectory(s0, v0, aero: CarcassAero, wind_speed: float,
                         rotor: TurbineSpec = TurbineSpec(), dt: float = DT) -> Landing:
    """Landing point of one carcass released at s0 = (x, w, y) with velocity v0"""
    land, times = _integrate(np.asarray(s0, dtype=float)[None, :], np.asarray(v0, dtype=float)[None, :],
                             np.array([wind_speed]), aero, rotor, dt)
    return Landing(x=float(land[0, 0]), w=float(land[0, 1]), time=float(times[0]))


# ==================== SCENARIOS ====================

def sample_wind(regime: WindRegime, size: int, rng) -> np.ndarray:
    """Nacelle wind speeds of carcass-producing events"""
    if regime.kind is WindKind.CONSTANT:
        if regime.speed < regime.cutoff:
            raise InvalidArgumentError(
                f"Constant wind {regime.speed} m/s is below the {regime.cutoff} m/s cutoff")
        return np.full(size, float(regime.speed))
    out = np.empty(0)
    if regime.kind is WindKind.MODERATE:
        envelope = BallisticsConfig.moderate_envelope()
        while len(out) < size:
            w = rng.uniform(regime.cutoff, regime.upper, 2 * size)
            accept = rng.random(2 * size) * envelope < WindRegime.moderate_density(w)
            out = np.concatenate([out, w[accept]])
        return out[:size]
    shape, scale = regime.weibull_parameters()
    while len(out) < size:
        w = scale * rng.weibull(shape, 2 * size)
        out = np.concatenate([out, w[w >= regime.cutoff]])
    return out[:size]


class ScenarioConfig(BaseModel):
    """One ballistics scenario"""
    name: Optional[str] = None
    species: Species = Species.BAT
    wind: str = "constant_8"
    flight_mode: FlightMode = FlightMode.ZERO
    plot: PlotKind = PlotKind.CLEARED
    radius: float = Field(default=100.0, gt=0)
    replicates: int = Field(default=100, ge=1)
    carcasses: int = Field(default=BallisticsConfig.CARCASSES_PER_REPLICATE, ge=1)
    min_found: int = Field(default=BallisticsConfig.MIN_FOUND, ge=0)
    seed: Optional[int] = None
    oracle_size: int = Field(default=1_000_000, ge=1)
    terminal_velocity: Optional[float] = Field(default=None, gt=0)
    strike_sampling: str = "radius"
    padrad: float = Field(default=15.0, gt=0)
    roadwidth: float = Field(default=5.0, gt=0)
    n_road: int = Field(default=2, ge=1)
    models: Optional[List[str]] = None

    @field_validator("wind")
    @classmethod
    def _known_wind(cls, value):
        BallisticsConfig.get_wind_regime(value)
        return value

    @field_validator("strike_sampling")
    @classmethod
    def _known_sampling(cls, value):
        if value not in ("radius", "area"):
            raise ValueError("strike_sampling must be 'radius' or 'area'")
        return value

    @property
    def label(self) -> str:
        return self.name or f"{self.species.value}_{self.wind}_{self.flight_mode.value}_{self.plot.value}{self.radius:g}"

    @property
    def aero(self) -> CarcassAero:
        if self.terminal_velocity:
            return CarcassAero(self.terminal_velocity)
        return CarcassAero.for_species(self.species)

    @property
    def regime(self) -> WindRegime:
        return BallisticsConfig.get_wind_regime(self.wind)

    @property
    def plot_row(self) -> SimpleGeometryRow:
        if self.plot is PlotKind.CLEARED:
            return SimpleGeometryRow(turbine="t1", radius=self.radius, shape=PlotShape.CIRCULAR)
        return SimpleGeometryRow(turbine="t1", radius=self.radius, shape=PlotShape.RP,
                                 padrad=self.padrad, roadwidth=self.roadwidth, n_road=self.n_road)

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "ScenarioConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise SchemaError(f"Scenario file not found: {path}") from None
        try:
            return cls(**data)
        except ValidationError as err:
            first = err.errors()[0]
            column = ".".join(str(p) for p in first.get("loc", ())) or None
            raise SchemaError(f"Invalid scenario {path}: {first.get('msg')}", column=column) from None


def simulate_landings(n: int, scenario: ScenarioConfig, rng,
                      rotor: TurbineSpec = TurbineSpec(), dt: float = DT) -> pd.DataFrame:
    """Ground positions of n carcasses, turbine at the origin"""
    wind = sample_wind(scenario.regime, n, rng)
    strike = sample_strike(rotor, rng, n, scenario.strike_sampling)
    v0 = initial_velocity(strike, wind, scenario.flight_mode, rng)
    s0 = np.column_stack([strike.offset, np.zeros(n), strike.height])
    land, times = _integrate(s0, v0, wind, scenario.aero, rotor, dt)
    direction = rng.uniform(0.0, 2 * math.pi, n)
    cross, down = land[:, 0], land[:, 1]
    x = cross * np.sin(direction) + down * np.cos(direction)
    y = -cross * np.cos(direction) + down * np.sin(direction)
    return pd.DataFrame({
        "x": x, "y": y, "distance": np.hypot(cross, down),
        "cross": cross, "downwind": down, "wind_speed": wind, "time": times,
    })


def true_psi(scenario: ScenarioConfig, seed=None, rotor: TurbineSpec = TurbineSpec()) -> float:
    """Monte Carlo fraction of landings inside the scenario's plot"""
    rng = np.random.default_rng(seed)
    row = scenario.plot_row
    inside, done = 0, 0
    while done < scenario.oracle_size:
        size = min(ORACLE_CHUNK, scenario.oracle_size - done)
        landings = simulate_landings(size, scenario, rng, rotor)
        inside += int(plot_contains(landings["x"].to_numpy(), landings["y"].to_numpy(), row).sum())
        done += size
    return inside / done


@dataclass
class ScenarioResult:
    scenario: ScenarioConfig
    carcasses: pd.DataFrame      # replicate, carcass, x, y, distance, found
    summary: pd.DataFrame        # replicate, found_count, skipped
    true_psi: float

    @property
    def kept_replicates(self) -> List[int]:
        return self.summary.loc[~self.summary["skipped"], "replicate"].tolist()

    def replicate(self, index: int) -> pd.DataFrame:
        return self.carcasses[self.carcasses["replicate"] == index]


def _run_replicate(index: int, scenario: ScenarioConfig, stream, rotor: TurbineSpec) -> pd.DataFrame:
    rng = np.random.default_rng(stream)
    landings = simulate_landings(scenario.carcasses, scenario, rng, rotor)
    found = plot_contains(landings["x"].to_numpy(), landings["y"].to_numpy(), scenario.plot_row)
    return pd.DataFrame({
        "replicate": index, "carcass": np.arange(1, len(landings) + 1),
        "x": landings["x"], "y": landings["y"], "distance": landings["distance"], "found": found,
    })


def run_scenario(scenario: ScenarioConfig, seed=None, n_jobs: int = 1,
                 rotor: TurbineSpec = TurbineSpec(), verbose: bool = False) -> ScenarioResult:
    """Replicated carcass sets with found flags and the oracle psi"""
    seed = scenario.seed if seed is None else seed
    oracle_stream, *streams = np.random.SeedSequence(seed).spawn(scenario.replicates + 1)
    jobs = (delayed(_run_replicate)(i + 1, scenario, s, rotor)
            for i, s in enumerate(tqdm(streams, desc=scenario.label, disable=not verbose)))
    frames = Parallel(n_jobs=n_jobs)(jobs)
    carcasses = pd.concat(frames, ignore_index=True)
    counts = carcasses.groupby("replicate")["found"].sum().astype(int)
    summary = pd.DataFrame({"replicate": counts.index, "found_count": counts.to_numpy()})
    summary["skipped"] = summary["found_count"] < scenario.min_found
    n_skipped = int(summary["skipped"].sum())
    if n_skipped:
        logger.warning(f"{scenario.label}: skipped {n_skipped} replicate(s) with fewer than "
                       f"{scenario.min_found} carcasses found")
    psi = true_psi(scenario, oracle_stream, rotor)
    logger.info(f"{scenario.label}: {scenario.replicates} replicate(s), true psi {psi:.4f}")
    return ScenarioResult(scenario=scenario, carcasses=carcasses, summary=summary, true_psi=psi)


# ==================== DETECTION ====================

@dataclass
class DetectionResult:
    arrival: np.ndarray
    persistence: np.ndarray
    found: np.ndarray
    search: np.ndarray   # index of the search that found the carcass, 0 if never

    @property
    def n_found(self) -> int:
        return int(self.found.sum())


def simulate_detection_process(distances, params: DetectionParams = DetectionParams(), rng=None,
                               in_plot=None) -> DetectionResult:
    """Arrival, scavenger removal and imperfect searches for each carcass

    Searches happen every search_interval days up to season_length. A carcass
    outside the plot is never found.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n = len(np.atleast_1d(distances))
    in_plot = np.ones(n, dtype=bool) if in_plot is None else np.asarray(in_plot, dtype=bool)
    arrival = rng.uniform(0.0, params.season_length, n)
    if math.isinf(params.persistence_scale):
        persistence = np.full(n, np.inf)
    else:
        persistence = params.persistence_scale * rng.weibull(params.persistence_shape, n)
    n_searches = int(math.floor(params.season_length / params.search_interval + 1e-9))
    search_times = params.search_interval * np.arange(1, n_searches + 1)

    found = np.zeros(n, dtype=bool)
    search = np.zeros(n, dtype=int)
    first = np.searchsorted(search_times, arrival, side="left")
    pending = in_plot.copy()
    for j in range(n_searches):
        k = j - first + 1
        available = pending & (k >= 1) & (search_times[j] < arrival + persistence)
        if not available.any():
            continue
        p = params.searcher_efficiency(np.maximum(k, 1))
        hit = available & (rng.random(n) < p)
        found |= hit
        search[hit] = j + 1
        pending &= ~hit
    return DetectionResult(arrival=arrival, persistence=persistence, found=found, search=search)
