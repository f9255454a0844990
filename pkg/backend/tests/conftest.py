import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from dwp import (
    ModelForm, add_carcasses, build_rings_circular, fit_battery, records_from_distances,
)

GAMMA_SHAPE = 4.0
GAMMA_RATE = 0.1
SRAD = 100


@pytest.fixture(scope="session")
def gamma_distances():
    """Evenly spaced gamma(4, 0.1) quantiles that fall inside 100 m (198 of 200)"""
    q = (np.arange(1, 201) - 0.5) / 200
    d = stats.gamma(a=GAMMA_SHAPE, scale=1 / GAMMA_RATE).ppf(q)
    return d[d <= SRAD]


@pytest.fixture(scope="session")
def gamma_profile(gamma_distances):
    return add_carcasses(build_rings_circular(SRAD), records_from_distances(gamma_distances))


@pytest.fixture(scope="session")
def gamma_fits(gamma_profile):
    forms = [ModelForm.XEP01, ModelForm.XEP1, ModelForm.XEP02, ModelForm.TNORMAL, ModelForm.CONSTANT]
    return fit_battery(gamma_profile, forms)


@pytest.fixture
def carcass_csv(tmp_path, gamma_distances):
    path = tmp_path / "carcasses.csv"
    pd.DataFrame({"turbine": "t1", "r": gamma_distances}).to_csv(path, index=False)
    return path
