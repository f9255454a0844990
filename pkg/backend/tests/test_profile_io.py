import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pandas as pd
import pytest

from dwp import (
    TOTAL, CarcassRecord, GridProfile, ModelForm, SimpleGeometryRow, add_carcasses, build_design,
    build_grid, build_rings_simple, grid_from_plot, load_profile, read_simple_layout, save_profile,
)
from dwp.errors import DwpIOError, SchemaError


def test_ring_bundle_reproduces_design(tmp_path):
    layout = pd.DataFrame({"turbine": ["007", "t2"], "radius": [30, 60], "shape": ["square", "circular"]})
    profile = build_rings_simple(read_simple_layout(layout))
    profile = add_carcasses(profile, [CarcassRecord(turbine="007", r=12.0),
                                      CarcassRecord(turbine="t2", r=41.5),
                                      CarcassRecord(turbine="t2", r=3.0)])
    loaded = load_profile(save_profile(profile, tmp_path / "profile"))

    # turbine ids stay strings
    assert loaded.turbines == ["007", "t2"]
    assert loaded.srad == profile.srad
    assert loaded.ncarc == {"007": 1, "t2": 2, TOTAL: 3}
    assert np.allclose(loaded.pinc("007"), profile.pinc("007"))
    before = build_design(profile, ModelForm.XEP01)
    after = build_design(loaded, ModelForm.XEP01)
    assert np.allclose(before.offset, after.offset)
    assert np.array_equal(before.y, after.y)


def test_grid_bundle(tmp_path):
    row = SimpleGeometryRow(turbine="t1", radius=8, shape="square")
    grid = build_grid(grid_from_plot(row, 2.0, [CarcassRecord(turbine="t1", x=3.1, y=-4.2)]))
    loaded = load_profile(save_profile(grid, tmp_path / "grid"))
    assert isinstance(loaded, GridProfile)
    assert loaded.cell_size == 2.0
    assert loaded.ncarc == grid.ncarc
    assert len(loaded.cells) == len(grid.cells)


def test_missing_bundle_file(tmp_path):
    with pytest.raises(DwpIOError) as err:
        load_profile(tmp_path / "nowhere")
    assert err.value.exit_code == 1


def test_bad_meta_table(tmp_path):
    (tmp_path / "meta.csv").write_text("name,value\nkind,\"ring\"\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_profile(tmp_path)
