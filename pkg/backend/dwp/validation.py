"""Replicated accuracy checks against simulated ground truth."""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from .ballistics_sim import ScenarioConfig, ScenarioResult, run_scenario, simulate_detection_process
from .config.ballistics_config import DetectionParams
from .config.enums import ModelForm, PlotShape
from .config.filter_config import FilterThresholds
from .coverage_estimation import est_dwp, est_psi, mle_psi
from .distance_distributions import extensible
from .errors import DwpError
from .glm_engine import delta_aicc, fit_battery, fit_poisson, build_design
from .layouts import CarcassRecord, SimpleGeometryRow
from .model_filter import filter_models
from .ring_geometry import add_carcasses, build_rings_simple, plot_contains
from .ring_profile import TOTAL

logger = logging.getLogger(__name__)

SELECTED = "selected"


def _found_profile(row: SimpleGeometryRow, carcasses: pd.DataFrame):
    records = [CarcassRecord(turbine=row.turbine, x=float(x), y=float(y))
               for x, y in zip(carcasses["x"], carcasses["y"])]
    return add_carcasses(build_rings_simple(row), records)


# ==================== PSI ACCURACY ====================

@dataclass
class PsiAccuracy:
    records: pd.DataFrame   # replicate, model, extensible, psi_hat, deltaAICc, selected
    summary: pd.DataFrame
    true_psi: float
    scenario: ScenarioConfig


def _summarize(records: pd.DataFrame, truth: float) -> pd.DataFrame:
    rows = []
    for model, group in records.groupby("model", sort=False):
        psi = group["psi_hat"].dropna().to_numpy()
        rows.append({
            "model": model,
            "n_fit": len(group),
            "frac_extensible": float(group["extensible"].mean()),
            "median_psi": float(np.median(psi)) if len(psi) else math.nan,
            "q05": float(np.quantile(psi, 0.05)) if len(psi) else math.nan,
            "q95": float(np.quantile(psi, 0.95)) if len(psi) else math.nan,
            "true_psi": truth,
            "frac_over": float((psi > truth).mean()) if len(psi) else math.nan,
            "mean_deltaAICc": float(group["deltaAICc"].mean()),
        })
    return pd.DataFrame.from_records(rows)


def _replicate_records(index: int, found: pd.DataFrame, row: SimpleGeometryRow, forms,
                       thresholds: Optional[FilterThresholds], run_filter: bool) -> List[Dict]:
    profile = _found_profile(row, found)
    fits = fit_battery(profile, forms)
    converged = {f: fit for f, fit in fits.items() if fit.converged}
    if not converged:
        return []
    deltas = delta_aicc(converged)
    psi = {f: mle_psi(profile, fit)[TOTAL] for f, fit in converged.items()}
    records = [{"replicate": index, "model": f.value, "extensible": extensible(f, fit.distance_beta),
                "psi_hat": psi[f], "deltaAICc": deltas[f]} for f, fit in converged.items()]
    if run_filter:
        try:
            table = filter_models(converged, profile, thresholds)
        except DwpError as err:
            logger.warning(f"Replicate {index}: filter failed ({err.message})")
        else:
            chosen = table.selected
            records.append({"replicate": index, "model": SELECTED, "extensible": table[chosen].extensible == 1,
                            "psi_hat": psi[chosen], "deltaAICc": deltas[chosen], "selected_model": chosen.value})
    return records


def psi_accuracy_harness(scenario: ScenarioConfig, forms: Optional[Iterable[Union[ModelForm, str]]] = None,
                         seed=None, thresholds: Optional[FilterThresholds] = None, run_filter: bool = True,
                         n_jobs: int = 1, verbose: bool = False,
                         result: Optional[ScenarioResult] = None) -> PsiAccuracy:
    """Per-model MLE psi over simulated replicates, compared with the oracle psi"""
    forms = forms or scenario.models or None
    result = result or run_scenario(scenario, seed, n_jobs=n_jobs, verbose=verbose)
    row = scenario.plot_row
    records = []
    for index in tqdm(result.kept_replicates, desc="fitting", disable=not verbose):
        carcasses = result.replicate(index)
        found = carcasses[carcasses["found"]]
        try:
            records.extend(_replicate_records(index, found, row, forms, thresholds, run_filter))
        except DwpError as err:
            logger.warning(f"Replicate {index}: skipped ({err.message})")
    frame = pd.DataFrame.from_records(records)
    summary = _summarize(frame, result.true_psi) if len(frame) else pd.DataFrame()
    logger.info(f"psi accuracy for {scenario.label}: {len(result.kept_replicates)} replicate(s) fitted")
    return PsiAccuracy(records=frame, summary=summary, true_psi=result.true_psi, scenario=scenario)


# ==================== INTERVAL COVERAGE ====================

@dataclass
class CoverageResult:
    replicates: pd.DataFrame    # m_in, n_found, true_dwp, psi_lo, psi_hi, dwp_lo, dwp_hi, covered flags
    level: float

    @property
    def dwp_coverage(self) -> float:
        return float(self.replicates["dwp_covered"].mean())

    @property
    def psi_coverage(self) -> float:
        return float(self.replicates["psi_covered"].mean())


def default_road_pad(radius: float = 150.0) -> SimpleGeometryRow:
    return SimpleGeometryRow(turbine="t1", radius=radius, shape=PlotShape.RP,
                             padrad=15.0, roadwidth=5.0, n_road=2)


def _coverage_replicate(index: int, stream, n_carcasses: int, truth, plot: SimpleGeometryRow,
                        detection: DetectionParams, form: ModelForm, nsim: int, level: float):
    rng = np.random.default_rng(stream)
    distance = truth.rvs(n_carcasses, random_state=rng)
    bearing = rng.uniform(0.0, 2 * math.pi, n_carcasses)
    x, y = distance * np.cos(bearing), distance * np.sin(bearing)
    in_plot = plot_contains(x, y, plot)
    m_in = int(in_plot.sum())
    found = simulate_detection_process(distance, detection, rng, in_plot=in_plot).found
    if found.sum() < 2:
        return None
    profile = _found_profile(plot, pd.DataFrame({"x": x[found], "y": y[found]}))
    fit = fit_poisson(build_design(profile, form))
    seeds = rng.integers(0, 2 ** 32, 2)
    psi = est_psi(profile, fit, nsim, seed=int(seeds[0]))
    dwp = est_dwp(psi, {u: m_in for u in psi.units}, seed=int(seeds[1]))
    alpha = (1 - level) / 2
    true_dwp = m_in / n_carcasses
    psi_lo, psi_hi = np.nanquantile(psi.draws[TOTAL], [alpha, 1 - alpha])
    dwp_lo, dwp_hi = np.nanquantile(dwp.draws[TOTAL], [alpha, 1 - alpha])
    return {
        "replicate": index, "m_in": m_in, "n_found": int(found.sum()), "true_dwp": true_dwp,
        "psi_lo": psi_lo, "psi_hi": psi_hi, "dwp_lo": dwp_lo, "dwp_hi": dwp_hi,
        "psi_covered": bool(psi_lo <= true_dwp <= psi_hi),
        "dwp_covered": bool(dwp_lo <= true_dwp <= dwp_hi),
    }


def coverage_harness(n_reps: int, n_carcasses: int = 1000, truth=None, plot: Optional[SimpleGeometryRow] = None,
                     detection: DetectionParams = DetectionParams(), form: Union[ModelForm, str] = ModelForm.XEP01,
                     nsim: int = 1000, level: float = 0.9, seed=None, verbose: bool = False) -> CoverageResult:
    """How often nominal psi and dwp intervals cover the realized in-plot fraction"""
    truth = truth if truth is not None else stats.gamma(a=1.7744, scale=1 / 0.0355)
    plot = plot or default_road_pad()
    form = form if isinstance(form, ModelForm) else ModelForm.parse(form)
    rows = []
    streams = np.random.SeedSequence(seed).spawn(n_reps)
    for index, stream in enumerate(tqdm(streams, desc="coverage", disable=not verbose), start=1):
        try:
            record = _coverage_replicate(index, stream, n_carcasses, truth, plot, detection, form, nsim, level)
        except DwpError as err:
            logger.warning(f"Coverage replicate {index} skipped: {err.message}")
            continue
        if record is None:
            logger.warning(f"Coverage replicate {index} skipped: fewer than 2 carcasses found")
            continue
        rows.append(record)
    result = CoverageResult(replicates=pd.DataFrame.from_records(rows), level=level)
    if len(rows):
        logger.info(f"Coverage over {len(rows)} replicate(s): dwp {result.dwp_coverage:.3f}, "
                    f"psi {result.psi_coverage:.3f}")
    return result
