"""CSV bundles for prepared profiles.

A ring bundle holds rdat.csv, rpA.csv and meta.csv; a grid bundle holds
cells.csv and meta.csv. meta.csv is a key/value table.
"""
import json
import logging
from pathlib import Path
from typing import Dict, Union

import pandas as pd

from .errors import DwpIOError, SchemaError
from .ring_profile import TOTAL, GridProfile, RingProfile

logger = logging.getLogger(__name__)

RING = "ring"
GRID = "grid"


def _write(df: pd.DataFrame, path: Path):
    df.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def _meta_frame(meta: Dict) -> pd.DataFrame:
    return pd.DataFrame({"key": list(meta), "value": [json.dumps(v) for v in meta.values()]})


def save_profile(profile: Union[RingProfile, GridProfile], directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        if isinstance(profile, GridProfile):
            _write(profile.cells, directory / "cells.csv")
            meta = {"kind": GRID, "cell_size": profile.cell_size, "sc_var": profile.sc_var,
                    "tcenter": {t: list(c) for t, c in profile.tcenter.items()}}
        else:
            units = profile.turbines + [TOTAL]
            rdat = pd.concat([profile.rdat[u].assign(turbine=u) for u in units], ignore_index=True)
            rpA = pd.concat([profile.rpA[u].assign(turbine=u) for u in units], ignore_index=True)
            _write(rdat[["turbine"] + [c for c in rdat.columns if c != "turbine"]], directory / "rdat.csv")
            _write(rpA[["turbine", "r", "pinc"]], directory / "rpA.csv")
            meta = {"kind": RING, "srad": profile.srad, "sc_var": profile.sc_var,
                    "turbines": profile.turbines, "turbine_srad": profile.turbine_srad,
                    "not_searched": list(profile.not_searched),
                    "tcenter": {t: list(c) for t, c in profile.tcenter.items()}}
        _write(_meta_frame(meta), directory / "meta.csv")
    except OSError as err:
        raise DwpIOError(f"Cannot write profile bundle: {err}", path=directory) from err
    logger.info(f"Saved profile bundle to {directory}")
    return directory


def _read(path: Path, **kwargs) -> pd.DataFrame:
    if not path.exists():
        raise DwpIOError(f"Missing profile file {path.name}", path=path)
    return pd.read_csv(path, **kwargs)


def load_profile(directory: Union[str, Path]) -> Union[RingProfile, GridProfile]:
    directory = Path(directory)
    meta_df = _read(directory / "meta.csv", dtype=str, keep_default_na=False)
    if list(meta_df.columns) != ["key", "value"]:
        raise SchemaError("meta.csv must have columns key,value", column="key")
    meta = {k: json.loads(v) for k, v in zip(meta_df["key"], meta_df["value"])}
    sc_var = meta.get("sc_var")
    tcenter = {t: tuple(c) for t, c in (meta.get("tcenter") or {}).items()}

    if meta.get("kind") == GRID:
        dtype = {"turbine": str, sc_var: str} if sc_var else {"turbine": str}
        cells = _read(directory / "cells.csv", dtype=dtype)
        ncarc = {t: int(n) for t, n in cells.groupby("turbine", sort=False)["ncarc"].sum().items()}
        ncarc[TOTAL] = int(cells["ncarc"].sum())
        return GridProfile(cells=cells, cell_size=float(meta["cell_size"]), ncarc=ncarc,
                           sc_var=sc_var, tcenter=tcenter)

    dtype = {"turbine": str, sc_var: str} if sc_var else {"turbine": str}
    rdat_all = _read(directory / "rdat.csv", dtype=dtype)
    rpA_all = _read(directory / "rpA.csv", dtype={"turbine": str})
    units = list(meta.get("turbines") or []) + [TOTAL]
    rdat, rpA = {}, {}
    for unit in units:
        rdat[unit] = rdat_all[rdat_all["turbine"] == unit].drop(columns="turbine").reset_index(drop=True)
        rpA[unit] = rpA_all[rpA_all["turbine"] == unit].drop(columns="turbine").reset_index(drop=True)
        if rdat[unit].empty:
            raise SchemaError(f"rdat.csv has no rows for '{unit}'", column="turbine")
    ncarc = {u: int(df["ncarc"].sum()) for u, df in rdat.items()}
    profile = RingProfile(
        rdat=rdat, rpA=rpA, srad=int(meta["srad"]), ncarc=ncarc, sc_var=sc_var, tcenter=tcenter,
        turbine_srad={t: float(v) for t, v in (meta.get("turbine_srad") or {}).items()},
        not_searched=tuple(meta.get("not_searched") or ()),
    )
    logger.info(f"Loaded ring profile from {directory}: {len(profile.turbines)} turbine(s)")
    return profile
