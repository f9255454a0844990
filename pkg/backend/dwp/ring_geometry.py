"""Ring structure: searched area and carcass counts in 1 m annuli.

Every supported layout (distance vectors, simple plots, polygons) is reduced
to per-turbine ring tables plus a pooled site table. A carcass at distance d
belongs to ring r with r - 1 < d <= r (d = 0 goes to ring 1).
"""
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import shapely
from joblib import Parallel, delayed

from .config.enums import PlotShape
from .errors import InvalidArgumentError, InvalidCarcassError, InvalidLayoutError
from .layouts import (
    DEFAULT_UNIT, CarcassRecord, GridLayout, PolygonLayout, SimpleGeometryRow,
)
from .ring_profile import TOTAL, GridProfile, RingProfile, annulus_area

logger = logging.getLogger(__name__)

N_ANGLES = 3600
N_RADIAL = 5


# ==================== PLOT GEOMETRY ====================

def road_directions(n_road: int) -> np.ndarray:
    step = min(math.pi / 2, 2 * math.pi / n_road)
    return np.arange(n_road) * step


def _check_roads(row: SimpleGeometryRow):
    half = row.roadwidth / 2
    if half > row.padrad:
        raise InvalidLayoutError(f"Road wider than pad at turbine '{row.turbine}'",
                                 turbine=row.turbine, field="roadwidth")
    if row.n_road < 2:
        return
    step = min(math.pi / 2, 2 * math.pi / row.n_road)
    # adjacent strips meet at half / sin(step / 2) from the turbine
    if half / math.sin(step / 2) > row.padrad + 1e-9:
        raise InvalidLayoutError(
            f"Roads at turbine '{row.turbine}' overlap outside the pad",
            turbine=row.turbine, field="roadwidth",
        )


def _strip_area(rho, half):
    """Area of a half-strip of half-width `half` leaving the origin, within radius rho"""
    rho = np.maximum(rho, half)
    return half * np.sqrt(rho ** 2 - half ** 2) + rho ** 2 * np.arcsin(half / rho)


def searched_area_within(row: SimpleGeometryRow, rho) -> np.ndarray:
    """Searched area of a simple plot inside the disc of radius rho"""
    rho = np.minimum(np.asarray(rho, dtype=float), _outer_radius(row))
    if row.shape is PlotShape.CIRCULAR:
        return math.pi * rho ** 2
    if row.shape is PlotShape.SQUARE:
        h = row.radius
        with np.errstate(invalid="ignore"):
            ratio = np.clip(h / np.maximum(rho, 1e-300), 0.0, 1.0)
            caps = rho ** 2 * np.arccos(ratio) - h * np.sqrt(np.maximum(rho ** 2 - h ** 2, 0.0))
        return np.where(rho <= h, math.pi * rho ** 2, math.pi * rho ** 2 - 4 * caps)
    half = row.roadwidth / 2
    pad = min(row.padrad, row.radius)
    roads = row.n_road * (_strip_area(rho, half) - _strip_area(pad, half))
    return np.where(rho <= pad, math.pi * rho ** 2, math.pi * pad ** 2 + roads)


def _outer_radius(row: SimpleGeometryRow) -> float:
    if row.shape is PlotShape.SQUARE:
        return row.radius * math.sqrt(2)
    return row.radius


def _full_radius(row: SimpleGeometryRow) -> float:
    """Radius inside which every ring is fully searched"""
    if row.shape is PlotShape.RP:
        return min(row.padrad, row.radius)
    return row.radius


def circle_contains(x, y, radius):
    return np.hypot(x, y) <= radius


def square_contains(x, y, half_side):
    return (np.abs(x) <= half_side) & (np.abs(y) <= half_side)


def rp_contains(x, y, row: SimpleGeometryRow):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.hypot(x, y)
    inside = d <= min(row.padrad, row.radius)
    half = row.roadwidth / 2
    for theta in road_directions(row.n_road):
        along = x * math.cos(theta) + y * math.sin(theta)
        across = -x * math.sin(theta) + y * math.cos(theta)
        inside = inside | ((along >= 0) & (np.abs(across) <= half) & (d <= row.radius))
    return inside


def plot_contains(x, y, row: SimpleGeometryRow):
    """Point-in-plot test for a simple geometry, turbine at the origin"""
    if row.shape is PlotShape.CIRCULAR:
        return circle_contains(x, y, row.radius)
    if row.shape is PlotShape.SQUARE:
        return square_contains(x, y, row.radius)
    return rp_contains(x, y, row)


# ==================== PROFILE ASSEMBLY ====================

def _ring_table(r, exposure, labels=None, sc_var=None) -> pd.DataFrame:
    data = {"r": np.asarray(r, dtype=int)}
    if sc_var:
        data[sc_var] = labels
    data["exposure"] = np.asarray(exposure, dtype=float)
    data["ncarc"] = np.zeros(len(data["r"]), dtype=int)
    return pd.DataFrame(data)


def _pinc_table(rdat: pd.DataFrame, n_units: int = 1, srad: Optional[int] = None) -> pd.DataFrame:
    srad = int(rdat["r"].max()) if srad is None else srad
    r = np.arange(1, srad + 1)
    summed = rdat.groupby("r")["exposure"].sum().reindex(r, fill_value=0.0).to_numpy()
    pinc = np.clip(summed / (n_units * annulus_area(r)), 0.0, 1.0)
    return pd.DataFrame({"r": r, "pinc": pinc})


def pool_site(profile: RingProfile) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Site-level ring table: exposures and counts summed over turbines"""
    turbines = profile.turbines
    if not turbines:
        raise InvalidLayoutError("Cannot pool a profile without turbines")
    keys = ["r", profile.sc_var] if profile.sc_var else ["r"]
    stacked = pd.concat([profile.rdat[t] for t in turbines], ignore_index=True)
    rdat = (stacked.groupby(keys, sort=True)[["exposure", "ncarc"]].sum().reset_index())
    rdat["ncarc"] = rdat["ncarc"].astype(int)
    srad = int(rdat["r"].max())
    return rdat, _pinc_table(rdat, n_units=len(turbines), srad=srad)


def _assemble(turbine_rdat: Dict[str, pd.DataFrame], *, sc_var=None, tcenter=None,
              turbine_srad=None, not_searched=(), plots=None, layout=None) -> RingProfile:
    rdat = dict(turbine_rdat)
    rpA = {t: _pinc_table(df) for t, df in rdat.items()}
    ncarc = {t: int(df["ncarc"].sum()) for t, df in rdat.items()}
    profile = RingProfile(
        rdat=rdat, rpA=rpA, srad=max(int(df["r"].max()) for df in rdat.values()),
        ncarc=ncarc, sc_var=sc_var,
        tcenter={t: (tcenter or {}).get(t, (0.0, 0.0)) for t in rdat},
        turbine_srad=dict(turbine_srad or {}), not_searched=tuple(not_searched),
        plots=dict(plots or {}), layout=layout,
    )
    total_rdat, total_rpA = pool_site(profile)
    profile.rdat[TOTAL] = total_rdat
    profile.rpA[TOTAL] = total_rpA
    profile.ncarc[TOTAL] = sum(ncarc.values())
    return profile


# ==================== BUILDERS ====================

def _circle_exposure(radius: float) -> Tuple[np.ndarray, np.ndarray]:
    srad = int(math.ceil(radius))
    r = np.arange(1, srad + 1)
    clipped = math.pi * (radius ** 2 - (r - 1.0) ** 2)
    return r, np.where(r <= radius, annulus_area(r), clipped)


def build_rings_circular(srad: float, turbines: Optional[Sequence[str]] = None) -> RingProfile:
    """Full-coverage circular plots of radius srad at every turbine"""
    if srad is None or not srad > 0:
        raise InvalidLayoutError(f"Search radius must be positive, got {srad}", field="srad")
    turbines = list(turbines) if turbines else [DEFAULT_UNIT]
    r, exposure = _circle_exposure(float(srad))
    rdat = {t: _ring_table(r, exposure) for t in turbines}
    logger.info(f"Built circular ring profile: srad={srad}, {len(turbines)} turbine(s)")
    return _assemble(rdat, turbine_srad={t: float(srad) for t in turbines})


def build_rings_simple(rows: Union[SimpleGeometryRow, Iterable[SimpleGeometryRow]]) -> RingProfile:
    """Ring profile for circular, square and road-and-pad plots"""
    rows = [rows] if isinstance(rows, SimpleGeometryRow) else list(rows)
    if not rows:
        raise InvalidLayoutError("Simple-geometry layout has no rows")
    seen = set()
    rdat, tsrad, plots = {}, {}, {}
    for row in rows:
        if not isinstance(row.shape, PlotShape):
            raise InvalidLayoutError(f"Unknown plot shape '{row.shape}'", turbine=row.turbine, field="shape")
        if row.turbine in seen:
            raise InvalidLayoutError(f"Duplicate turbine '{row.turbine}'", turbine=row.turbine, field="turbine")
        seen.add(row.turbine)
        if row.shape is PlotShape.RP:
            _check_roads(row)
        if row.shape is PlotShape.CIRCULAR:
            r, exposure = _circle_exposure(row.radius)
        else:
            outer = _outer_radius(row)
            r = np.arange(1, int(math.ceil(outer - 1e-9)) + 1)
            exposure = searched_area_within(row, r) - searched_area_within(row, r - 1)
            exposure = np.where(r <= _full_radius(row), annulus_area(r),
                                np.clip(exposure, 0.0, annulus_area(r)))
        rdat[row.turbine] = _ring_table(r, exposure)
        tsrad[row.turbine] = _outer_radius(row)
        plots[row.turbine] = row
    logger.info(f"Built simple-geometry ring profile for {len(rows)} turbine(s)")
    return _assemble(rdat, turbine_srad=tsrad, plots=plots)


def _polygon_exposure(geoms: Dict, srad: int, n_angles: int, n_radial: int):
    """Exposure per (ring, class) by angular quadrature at sub-ring radii"""
    theta = (np.arange(n_angles) + 0.5) * 2 * math.pi / n_angles
    offsets = (np.arange(n_radial) + 0.5) / n_radial
    r = np.arange(1, srad + 1)
    rho = (r[:, None] - 1.0) + offsets[None, :]
    weights = rho * (2 * math.pi / n_angles) / n_radial
    xs = (rho[:, :, None] * np.cos(theta)).ravel()
    ys = (rho[:, :, None] * np.sin(theta)).ravel()
    out = {}
    for label, geom in geoms.items():
        shapely.prepare(geom)
        inside = shapely.contains_xy(geom, xs, ys).reshape(srad, n_radial, n_angles)
        exposure = (inside.sum(axis=2) * weights).sum(axis=1)
        out[label] = np.minimum(exposure, annulus_area(r))
    return out


def build_rings_polygon(layout: PolygonLayout, not_searched: Iterable[str] = (),
                        n_angles: int = N_ANGLES, n_radial: int = N_RADIAL,
                        n_jobs: int = 1) -> RingProfile:
    """Ring profile from searched polygons; classes in not_searched carry no exposure"""
    if n_angles < 4 or n_radial < 1:
        raise InvalidArgumentError("Quadrature needs at least 4 angles and 1 radial sample")
    not_searched = tuple(str(c) for c in not_searched)
    sc_var = layout.class_col
    turbines = layout.turbines
    sradii = {t: int(math.ceil(layout.max_radius(t) - 1e-9)) for t in turbines}
    geoms = {
        t: {label: g for label, g in layout.class_geometry(t).items() if label not in not_searched}
        for t in turbines
    }
    results = Parallel(n_jobs=n_jobs)(
        delayed(_polygon_exposure)(geoms[t], sradii[t], n_angles, n_radial) for t in turbines
    )
    rdat = {}
    for t, by_class in zip(turbines, results):
        r = np.arange(1, sradii[t] + 1)
        if not by_class:
            raise InvalidLayoutError(f"Turbine '{t}' has no searched class", turbine=t)
        if sc_var:
            labels = sorted(by_class)
            table = pd.concat(
                [_ring_table(r, by_class[c], [c] * len(r), sc_var) for c in labels], ignore_index=True
            ).sort_values(["r", sc_var], kind="mergesort").reset_index(drop=True)
        else:
            table = _ring_table(r, sum(by_class.values()))
        rdat[t] = table
    logger.info(f"Built polygon ring profile for {len(turbines)} turbine(s) "
                f"({n_angles} angles x {n_radial} radial samples)")
    return _assemble(rdat, sc_var=sc_var, tcenter=layout.tcenter,
                     turbine_srad={t: layout.max_radius(t) for t in turbines},
                     not_searched=not_searched, layout=layout)


# ==================== CARCASSES ====================

def ring_of(distance) -> np.ndarray:
    """Ring index for distances: (r-1, r] with 0 in ring 1"""
    return np.maximum(1, np.ceil(np.asarray(distance, dtype=float))).astype(int)


def _locate(profile: RingProfile, rec: CarcassRecord, layout: Optional[PolygonLayout], idx: int):
    turbine = rec.turbine
    label = rec.search_class
    if not rec.has_location:
        return float(rec.r), label
    cx, cy = profile.tcenter.get(turbine, (0.0, 0.0))
    dx, dy = rec.x - cx, rec.y - cy
    if layout is not None and turbine in layout.pieces:
        inside, located = layout.locate(turbine, dx, dy)
        if not inside:
            raise InvalidCarcassError(f"Carcass {idx} at turbine '{turbine}' lies outside the searched area",
                                      turbine=turbine, record=idx)
        if located is not None and located in profile.not_searched:
            raise InvalidCarcassError(f"Carcass {idx} at turbine '{turbine}' lies in unsearched class '{located}'",
                                      turbine=turbine, record=idx)
        label = located
    elif turbine in profile.plots and not plot_contains(dx, dy, profile.plots[turbine]):
        raise InvalidCarcassError(f"Carcass {idx} at turbine '{turbine}' lies outside the searched area",
                                  turbine=turbine, record=idx)
    return float(math.hypot(dx, dy)), label


def _tally(profile: RingProfile, records: List[CarcassRecord], layout) -> RingProfile:
    rdat = {t: profile.rdat[t].copy() for t in profile.turbines}
    lookup = {}
    for t, df in rdat.items():
        labels = df[profile.sc_var].astype(str) if profile.sc_var else [None] * len(df)
        lookup[t] = {(int(r), c): i for i, (r, c) in enumerate(zip(df["r"], labels))}
    for idx, rec in enumerate(records, start=1):
        turbine = rec.turbine
        if turbine not in rdat:
            raise InvalidCarcassError(f"Carcass {idx} refers to unknown turbine '{turbine}'",
                                      turbine=turbine, record=idx)
        distance, label = _locate(profile, rec, layout, idx)
        limit = profile.turbine_srad.get(turbine, float(rdat[turbine]["r"].max()))
        if distance > limit + 1e-9:
            raise InvalidCarcassError(
                f"Carcass {idx} at {distance:.2f} m lies beyond the search radius of turbine '{turbine}'",
                turbine=turbine, record=idx)
        if profile.sc_var and label is None:
            raise InvalidCarcassError(f"Carcass {idx} has no search class", turbine=turbine, record=idx)
        if not profile.sc_var:
            label = None
        row = lookup[turbine].get((int(ring_of(distance)), label))
        if row is None or rdat[turbine].at[row, "exposure"] <= 0:
            raise InvalidCarcassError(
                f"Carcass {idx} at turbine '{turbine}' falls in an unsearched part of ring {int(ring_of(distance))}",
                turbine=turbine, record=idx)
        rdat[turbine].at[row, "ncarc"] += 1
    return _assemble(rdat, sc_var=profile.sc_var, tcenter=profile.tcenter,
                     turbine_srad=profile.turbine_srad, not_searched=profile.not_searched,
                     plots=profile.plots, layout=profile.layout)


def add_carcasses(profile: RingProfile, records: Iterable[CarcassRecord],
                  layout: Optional[PolygonLayout] = None,
                  cc_col: Optional[str] = None) -> Union[RingProfile, Dict[str, RingProfile]]:
    """Tally carcasses into rings; with cc_col, one profile per carcass class"""
    records = list(records)
    layout = layout if layout is not None else profile.layout
    if not cc_col:
        updated = _tally(profile, records, layout)
        logger.info(f"Added {len(records)} carcass(es): {updated.ncarc[TOTAL]} in profile")
        return updated
    groups: Dict[str, List[CarcassRecord]] = {}
    for idx, rec in enumerate(records, start=1):
        if rec.carcass_class is None:
            raise InvalidCarcassError(f"Carcass {idx} has no value for '{cc_col}'",
                                      turbine=rec.turbine, record=idx)
        groups.setdefault(rec.carcass_class, []).append(rec)
    split = {label: _tally(profile, groups[label], layout) for label in sorted(groups)}
    logger.info(f"Added {len(records)} carcass(es) split by '{cc_col}' into {len(split)} classes")
    return split


def get_ncarc(profile: Union[RingProfile, GridProfile]) -> Dict[str, int]:
    return dict(profile.ncarc)


def subset_profile(profile: Union[RingProfile, GridProfile], turbines: Sequence[str]):
    """Restrict to a turbine subset and re-pool the site level"""
    turbines = list(dict.fromkeys(turbines))
    missing = [t for t in turbines if t not in profile.turbines]
    if missing or not turbines:
        raise InvalidArgumentError(f"Unknown or empty turbine subset: {missing or turbines}")
    if isinstance(profile, GridProfile):
        cells = profile.cells[profile.cells["turbine"].isin(turbines)].reset_index(drop=True)
        return _grid_profile(cells, profile.cell_size, profile.sc_var, profile.tcenter)
    return _assemble({t: profile.rdat[t].copy() for t in turbines}, sc_var=profile.sc_var,
                     tcenter=profile.tcenter, turbine_srad=profile.turbine_srad,
                     not_searched=profile.not_searched, plots=profile.plots, layout=profile.layout)


# ==================== GRID ====================

def _grid_profile(cells: pd.DataFrame, cell_size: float, sc_var, tcenter=None) -> GridProfile:
    ncarc = {t: int(n) for t, n in cells.groupby("turbine", sort=False)["ncarc"].sum().items()}
    ncarc[TOTAL] = int(cells["ncarc"].sum())
    return GridProfile(cells=cells, cell_size=cell_size, ncarc=ncarc, sc_var=sc_var,
                       tcenter=dict(tcenter or {}))


def build_grid(layout: GridLayout) -> GridProfile:
    rows = layout.rows
    size = float(layout.cell_size)
    if rows.duplicated(["turbine", "x", "y"]).any():
        dup = rows.loc[rows.duplicated(["turbine", "x", "y"])].iloc[0]
        raise InvalidLayoutError(f"Duplicate grid cell ({dup['x']}, {dup['y']}) at turbine '{dup['turbine']}'",
                                 turbine=dup["turbine"], field="x")
    for col in ("x", "y"):
        for t, values in rows.groupby("turbine")[col]:
            steps = (values.to_numpy(dtype=float) - values.min()) / size
            if np.abs(steps - np.round(steps)).max() > 1e-6:
                raise InvalidLayoutError(f"Grid cells at turbine '{t}' are not on a {size} m lattice",
                                         turbine=t, field=col)
    r = np.hypot(rows["x"].to_numpy(dtype=float), rows["y"].to_numpy(dtype=float))
    if "r" in rows.columns:
        off = np.abs(rows["r"].to_numpy(dtype=float) - r) > size * math.sqrt(2) / 2 + 1e-9
        if off.any():
            raise InvalidLayoutError("Column r disagrees with the cell-center distance", field="r")
    cells = pd.DataFrame({"turbine": rows["turbine"], "x": rows["x"].astype(float),
                          "y": rows["y"].astype(float), "r": r})
    if layout.sc_var:
        cells[layout.sc_var] = rows[layout.sc_var].astype(str)
    cells["exposure"] = size ** 2
    cells["ncarc"] = rows["ncarc"].astype(int)
    logger.info(f"Built grid profile: {len(cells)} cells of {size} m")
    return _grid_profile(cells, size, layout.sc_var)


def grid_from_plot(row: SimpleGeometryRow, cell_size: float = 1.0,
                   carcasses: Optional[Iterable[CarcassRecord]] = None) -> GridLayout:
    """Enumerate searched cells of a simple plot; carcass locations snap to their cell"""
    if cell_size <= 0:
        raise InvalidArgumentError("cell_size must be positive")
    n = int(math.ceil(_outer_radius(row) / cell_size))
    ticks = np.arange(-n, n + 1) * cell_size
    gx, gy = np.meshgrid(ticks, ticks, indexing="xy")
    gx, gy = gx.ravel(), gy.ravel()
    keep = plot_contains(gx, gy, row)
    cells = pd.DataFrame({"turbine": row.turbine, "x": gx[keep], "y": gy[keep], "ncarc": 0})
    index = {(int(round(x / cell_size)), int(round(y / cell_size))): i for i, (x, y) in enumerate(zip(cells["x"], cells["y"]))}
    for idx, rec in enumerate(carcasses or (), start=1):
        if not rec.has_location:
            raise InvalidCarcassError(f"Carcass {idx} needs a location for grid tallies",
                                      turbine=rec.turbine, record=idx)
        cell = index.get((int(round(rec.x / cell_size)), int(round(rec.y / cell_size))))
        if cell is None:
            raise InvalidCarcassError(f"Carcass {idx} lies outside the searched cells",
                                      turbine=rec.turbine, record=idx)
        cells.at[cell, "ncarc"] += 1
    return GridLayout(rows=cells, cell_size=cell_size)
