import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd


TOTAL = "total"


def annulus_area(r):
    """Area of the 1 m ring (r-1, r]"""
    return math.pi * (2 * np.asarray(r, dtype=float) - 1)


@dataclass
class RingProfile:
    """Ring tallies per turbine plus the pooled site ("total")

    rdat[t] has columns r, [sc_var], exposure, ncarc; rpA[t] has r, pinc.
    """
    rdat: Dict[str, pd.DataFrame]
    rpA: Dict[str, pd.DataFrame]
    srad: int
    ncarc: Dict[str, int]
    sc_var: Optional[str] = None
    tcenter: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    turbine_srad: Dict[str, float] = field(default_factory=dict)
    not_searched: Tuple[str, ...] = ()
    plots: Dict[str, object] = field(default_factory=dict, repr=False)
    layout: Optional[object] = field(default=None, repr=False)

    @property
    def turbines(self) -> List[str]:
        return [t for t in self.rdat if t != TOTAL]

    @property
    def classes(self) -> List[str]:
        if not self.sc_var:
            return []
        return sorted(self.rdat[TOTAL][self.sc_var].astype(str).unique())

    def pinc(self, turbine: str = TOTAL) -> np.ndarray:
        """Searched proportion for rings 1..srad (0 beyond the turbine's plot)"""
        out = np.zeros(self.srad)
        df = self.rpA[turbine]
        out[df["r"].to_numpy(dtype=int) - 1] = df["pinc"].to_numpy(dtype=float)
        return out


@dataclass
class GridProfile:
    """Searched cells per turbine (columns turbine, x, y, r, exposure, ncarc [, sc_var])"""
    cells: pd.DataFrame
    cell_size: float
    ncarc: Dict[str, int]
    sc_var: Optional[str] = None
    tcenter: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    @property
    def turbines(self) -> List[str]:
        return list(dict.fromkeys(self.cells["turbine"]))

    @property
    def srad(self) -> int:
        return int(math.ceil(self.cells["r"].max()))

    @property
    def classes(self) -> List[str]:
        if not self.sc_var:
            return []
        return sorted(self.cells[self.sc_var].astype(str).unique())

    def turbine_cells(self, turbine: str) -> pd.DataFrame:
        return self.cells[self.cells["turbine"] == turbine]
