"""Site layout and carcass inputs.

Readers turn CSV tables (or GeoJSON text for multipolygon layouts) into
validated layout objects. Coordinates are planar meters; polygon vertices
and grid cells are stored relative to their turbine.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from shapely import contains_xy
from shapely.geometry import MultiPolygon, Point, Polygon, shape
from shapely.ops import unary_union

from .config.enums import PlotShape
from .errors import InvalidLayoutError, SchemaError

logger = logging.getLogger(__name__)

DEFAULT_UNIT = "site"


def _first_error(err: ValidationError) -> Tuple[str, str]:
    first = err.errors()[0]
    loc = ".".join(str(part) for part in first.get("loc", ())) or None
    return loc, first.get("msg", str(err))


def require_columns(df: pd.DataFrame, columns: Iterable[str], what: str):
    for col in columns:
        if col not in df.columns:
            raise SchemaError(f"{what} table is missing required column '{col}'", column=col)


# ==================== SIMPLE GEOMETRY ====================

class SimpleGeometryRow(BaseModel):
    """One turbine's plot in a simple-geometry table"""
    turbine: str = Field(min_length=1)
    radius: float = Field(gt=0)
    shape: PlotShape
    padrad: Optional[float] = None
    roadwidth: Optional[float] = None
    n_road: Optional[int] = None

    @field_validator("shape", mode="before")
    @classmethod
    def _parse_shape(cls, value):
        if isinstance(value, PlotShape):
            return value
        return PlotShape.parse(value)

    @model_validator(mode="after")
    def _check_road_pad(self):
        if self.shape is PlotShape.RP:
            for name in ("padrad", "roadwidth", "n_road"):
                value = getattr(self, name)
                if value is None or (isinstance(value, float) and math.isnan(value)) or value <= 0:
                    raise ValueError(f"RP plots need a positive {name}")
        return self

    @classmethod
    def from_record(cls, record: dict) -> "SimpleGeometryRow":
        clean = {k: (None if isinstance(v, float) and math.isnan(v) else v)
                 for k, v in record.items()}
        try:
            return cls(**clean)
        except ValidationError as err:
            loc, msg = _first_error(err)
            raise InvalidLayoutError(
                f"Invalid simple-geometry row for turbine '{clean.get('turbine')}': {msg}",
                turbine=clean.get("turbine"), field=loc,
            ) from None


def read_simple_layout(data: Union[pd.DataFrame, str, Path]) -> List[SimpleGeometryRow]:
    df = _as_frame(data)
    require_columns(df, ("turbine", "radius", "shape"), "simple-geometry")
    df = df.astype({"turbine": str})
    if df["turbine"].duplicated().any():
        dup = df.loc[df["turbine"].duplicated(), "turbine"].iloc[0]
        raise InvalidLayoutError(f"Duplicate turbine '{dup}' in simple-geometry table",
                                 turbine=dup, field="turbine")
    keep = [c for c in ("turbine", "radius", "shape", "padrad", "roadwidth", "n_road") if c in df.columns]
    rows = [SimpleGeometryRow.from_record(rec) for rec in df[keep].to_dict("records")]
    logger.info(f"Read simple-geometry layout with {len(rows)} turbines")
    return rows


# ==================== POLYGONS ====================

@dataclass
class PolygonPiece:
    polygon: Polygon
    search_class: Optional[str] = None


@dataclass
class PolygonLayout:
    """Searched polygons per turbine, vertices relative to the turbine"""
    pieces: Dict[str, List[PolygonPiece]]
    tcenter: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    class_col: Optional[str] = None

    def __post_init__(self):
        for turbine, pieces in self.pieces.items():
            if not pieces:
                raise InvalidLayoutError(f"Turbine '{turbine}' has no search polygon", turbine=turbine)
            for piece in pieces:
                poly = piece.polygon
                if len(poly.exterior.coords) - 1 < 3:
                    raise InvalidLayoutError(f"Polygon for turbine '{turbine}' has fewer than 3 vertices",
                                             turbine=turbine)
                if not poly.is_valid:
                    raise InvalidLayoutError(f"Polygon for turbine '{turbine}' is self-intersecting",
                                             turbine=turbine)
            self._check_class_overlap(turbine, pieces)
            self.tcenter.setdefault(turbine, (0.0, 0.0))

    @staticmethod
    def _check_class_overlap(turbine, pieces):
        by_class = {}
        for piece in pieces:
            by_class.setdefault(piece.search_class, []).append(piece.polygon)
        merged = [unary_union(polys) for polys in by_class.values()]
        for i in range(len(merged)):
            for j in range(i + 1, len(merged)):
                if merged[i].intersection(merged[j]).area > 1e-6:
                    raise InvalidLayoutError(
                        f"Search classes overlap at turbine '{turbine}'", turbine=turbine)

    @property
    def turbines(self) -> List[str]:
        return sorted(self.pieces)

    def classes(self, turbine: Optional[str] = None) -> List[Optional[str]]:
        turbines = [turbine] if turbine else self.turbines
        labels = {p.search_class for t in turbines for p in self.pieces[t]}
        return sorted(labels, key=lambda c: (c is None, str(c)))

    def class_geometry(self, turbine: str) -> Dict[Optional[str], Union[Polygon, MultiPolygon]]:
        merged = {}
        for piece in self.pieces[turbine]:
            merged.setdefault(piece.search_class, []).append(piece.polygon)
        return {label: unary_union(polys) for label, polys in merged.items()}

    def max_radius(self, turbine: str) -> float:
        coords = np.vstack([np.asarray(p.polygon.exterior.coords) for p in self.pieces[turbine]])
        return float(np.hypot(coords[:, 0], coords[:, 1]).max())

    def locate(self, turbine: str, x: float, y: float) -> Tuple[bool, Optional[str]]:
        """(inside any piece, class label) for a point relative to the turbine"""
        for label, geom in self.class_geometry(turbine).items():
            if contains_xy(geom, x, y) or geom.boundary.distance(Point(x, y)) < 1e-9:
                return True, label
        return False, None


def read_polygon_table(data: Union[pd.DataFrame, str, Path],
                       class_col: Optional[str] = None,
                       piece_col: Optional[str] = None) -> PolygonLayout:
    """Polygon vertices in order, one polygon per turbine (or per turbine/class/piece)"""
    df = _as_frame(data)
    require_columns(df, ("turbine", "x", "y"), "polygon")
    if class_col:
        require_columns(df, (class_col,), "polygon")
    df = df.astype({"turbine": str})
    keys = ["turbine"] + [c for c in (class_col, piece_col) if c]
    pieces: Dict[str, List[PolygonPiece]] = {}
    for key, group in df.groupby(keys, sort=False):
        key = key if isinstance(key, tuple) else (key,)
        turbine = key[0]
        label = str(key[1]) if class_col else None
        poly = Polygon(group[["x", "y"]].to_numpy(dtype=float))
        pieces.setdefault(turbine, []).append(PolygonPiece(poly, label))
    logger.info(f"Read polygon layout with {len(pieces)} turbines")
    return PolygonLayout(pieces=pieces, class_col=class_col)


def read_geojson_layout(source: Union[str, Path, dict], class_key: str = "class") -> PolygonLayout:
    """FeatureCollection of searched polygons with properties turbine and class.

    Point features carrying a turbine property give turbine locations; polygon
    coordinates are then shifted so the turbine sits at the origin.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text(encoding="utf-8") if _looks_like_path(source) else str(source)
        doc = json.loads(text)
    features = doc.get("features", [])
    centers: Dict[str, Tuple[float, float]] = {}
    raw: Dict[str, List[Tuple[Polygon, Optional[str]]]] = {}
    for feat in features:
        props = feat.get("properties") or {}
        if "turbine" not in props:
            raise SchemaError("GeoJSON feature without a 'turbine' property", column="turbine")
        turbine = str(props["turbine"])
        geom = shape(feat["geometry"])
        if geom.geom_type == "Point":
            centers[turbine] = (geom.x, geom.y)
            continue
        label = props.get(class_key)
        label = None if label is None else str(label)
        polys = list(geom.geoms) if geom.geom_type == "MultiPolygon" else [geom]
        for poly in polys:
            raw.setdefault(turbine, []).append((poly, label))
    pieces: Dict[str, List[PolygonPiece]] = {}
    for turbine, items in raw.items():
        cx, cy = centers.get(turbine, (0.0, 0.0))
        for poly, label in items:
            shifted = Polygon(
                np.asarray(poly.exterior.coords) - (cx, cy),
                [np.asarray(ring.coords) - (cx, cy) for ring in poly.interiors],
            )
            pieces.setdefault(turbine, []).append(PolygonPiece(shifted, label))
    labels = [p.search_class for items in pieces.values() for p in items]
    has_classes = any(label is not None for label in labels)
    if has_classes and None in labels:
        raise SchemaError(f"Some GeoJSON polygons lack a '{class_key}' property", column=class_key)
    return PolygonLayout(pieces=pieces, tcenter=centers, class_col=class_key if has_classes else None)


def _looks_like_path(source) -> bool:
    if isinstance(source, Path):
        return True
    return not str(source).lstrip().startswith("{")


# ==================== GRID ====================

@dataclass
class GridLayout:
    """Searched cells (centers relative to turbine) with carcass counts"""
    rows: pd.DataFrame
    cell_size: Optional[float] = None
    sc_var: Optional[str] = None

    def __post_init__(self):
        require_columns(self.rows, ("turbine", "x", "y", "ncarc"), "grid")
        if self.sc_var:
            require_columns(self.rows, (self.sc_var,), "grid")
        self.rows = self.rows.astype({"turbine": str}).reset_index(drop=True)
        if (self.rows["ncarc"] < 0).any():
            raise InvalidLayoutError("Grid cells with negative ncarc", field="ncarc")
        if self.cell_size is None:
            self.cell_size = _infer_cell_size(self.rows)
        if self.cell_size <= 0:
            raise InvalidLayoutError("cell_size must be positive", field="cell_size")


def _infer_cell_size(rows: pd.DataFrame) -> float:
    steps = []
    for col in ("x", "y"):
        values = np.unique(rows[col].to_numpy(dtype=float))
        if len(values) > 1:
            steps.append(np.diff(values).min())
    return float(min(steps)) if steps else 1.0


def read_grid_layout(data: Union[pd.DataFrame, str, Path], cell_size: Optional[float] = None,
                     sc_var: Optional[str] = None) -> GridLayout:
    return GridLayout(rows=_as_frame(data), cell_size=cell_size, sc_var=sc_var)


# ==================== CARCASSES ====================

class CarcassRecord(BaseModel):
    """A found carcass, by distance or by location"""
    turbine: str = DEFAULT_UNIT
    r: Optional[float] = Field(default=None, ge=0)
    x: Optional[float] = None
    y: Optional[float] = None
    search_class: Optional[str] = None
    carcass_class: Optional[str] = None

    @model_validator(mode="after")
    def _check_position(self):
        has_xy = self.x is not None and self.y is not None
        if self.r is None and not has_xy:
            raise ValueError("carcass needs a distance r or a location (x, y)")
        return self

    @property
    def has_location(self) -> bool:
        return self.x is not None and self.y is not None


def read_carcasses(data: Union[pd.DataFrame, str, Path], sc_var: Optional[str] = None,
                   cc_col: Optional[str] = None) -> List[CarcassRecord]:
    df = _as_frame(data)
    if "r" not in df.columns and not {"x", "y"} <= set(df.columns):
        raise SchemaError("Carcass table needs column 'r' or columns 'x' and 'y'", column="r")
    for col in (sc_var, cc_col):
        if col:
            require_columns(df, (col,), "carcass")
    records = []
    for i, rec in enumerate(df.to_dict("records")):
        payload = {
            "turbine": str(rec.get("turbine", DEFAULT_UNIT)),
            "r": _num(rec.get("r")),
            "x": _num(rec.get("x")),
            "y": _num(rec.get("y")),
            "search_class": None if not sc_var else str(rec[sc_var]),
            "carcass_class": None if not cc_col else str(rec[cc_col]),
        }
        try:
            records.append(CarcassRecord(**payload))
        except ValidationError as err:
            loc, msg = _first_error(err)
            raise SchemaError(f"Carcass row {i + 1}: {msg}", column=loc) from None
    return records


def records_from_distances(distances: Sequence[float], turbine: str = DEFAULT_UNIT) -> List[CarcassRecord]:
    return [CarcassRecord(turbine=turbine, r=float(d)) for d in distances]


def _num(value):
    if value is None:
        return None
    try:
        value = float(value)
    except (TypeError, ValueError):
        return None
    return None if math.isnan(value) else value


def _as_frame(data) -> pd.DataFrame:
    if isinstance(data, pd.DataFrame):
        return data.copy()
    try:
        return pd.read_csv(data)
    except FileNotFoundError:
        raise SchemaError(f"Input file not found: {data}") from None
