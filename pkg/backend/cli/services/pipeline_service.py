import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from dwp import (
    DwpDraws, LayoutType, ModelForm, PsiDraws,
    add_carcasses, aicc_table, build_grid, build_rings_circular, build_rings_polygon,
    build_rings_simple, cdf_table, est_dwp, est_psi, export_genest, filter_models, fit_battery,
    format_genest, load_profile, read_carcasses, read_geojson_layout, read_grid_layout,
    read_polygon_table, read_simple_layout, run_scenario, save_profile, stats_table,
)
from dwp.errors import DwpIOError, SchemaError
from dwp.glm_engine import FittedGLM
from dwp.ballistics_sim import ScenarioConfig, ScenarioResult
from dwp.validation import psi_accuracy_harness

from ..config import RunConfig

logger = logging.getLogger(__name__)

STRATA_FILE = "strata.json"
PROFILE_DIR = "profile"
CDF_GRID_MAX = 200  # m
FITS_FILE = "fits.json"
SELECTED_FILE = "selected.json"


def _write_csv(df: pd.DataFrame, path: Path, **kwargs):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, lineterminator="\n", encoding="utf-8", **kwargs)
    except OSError as err:
        raise DwpIOError(f"Cannot write {path.name}: {err}", path=path) from err


def _write_json(data, path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as err:
        raise DwpIOError(f"Cannot write {path.name}: {err}", path=path) from err


def _read_json(path: Path):
    if not path.exists():
        raise DwpIOError(f"Missing {path.name}; run the earlier pipeline stage first", path=path)
    return json.loads(path.read_text(encoding="utf-8"))


class PipelineService:
    """Stage functions behind the CLI; every stage reads and writes under cfg.out"""

    # ==================== STRATA ====================

    def strata(self, out: Path) -> List[Tuple[Optional[str], Path]]:
        """(carcass class, directory) pairs; a single unlabeled stratum without cc_col"""
        out = Path(out)
        path = out / STRATA_FILE
        if not path.exists():
            return [(None, out)]
        return [(label, out / label) for label in _read_json(path)["labels"]]

    # ==================== PREP ====================

    def _base_profile(self, cfg: RunConfig):
        kind = cfg.layout_type
        if kind is LayoutType.DISTANCE:
            records = read_carcasses(cfg.carcasses, cc_col=cfg.cc_col)
            turbines = list(dict.fromkeys(r.turbine for r in records))
            return build_rings_circular(cfg.srad, turbines), records
        records = read_carcasses(cfg.carcasses, cc_col=cfg.cc_col) if cfg.carcasses else []
        if kind is LayoutType.SIMPLE:
            return build_rings_simple(read_simple_layout(cfg.layout)), records
        if kind is LayoutType.POLYGON:
            if Path(cfg.layout).suffix.lower() in (".geojson", ".json"):
                layout = read_geojson_layout(cfg.layout, class_key=cfg.sc_var or "class")
            else:
                layout = read_polygon_table(cfg.layout, class_col=cfg.sc_var)
            return build_rings_polygon(layout, cfg.not_searched, n_jobs=cfg.n_jobs), records
        if cfg.cc_col:
            raise SchemaError("Grid layouts carry counts per cell and cannot be split by carcass class",
                              column=cfg.cc_col)
        return build_grid(read_grid_layout(cfg.layout, cfg.cell_size, cfg.sc_var)), []

    def prepare(self, cfg: RunConfig) -> Dict[Optional[str], object]:
        cfg.check_inputs()
        profile, records = self._base_profile(cfg)
        if records:
            profile = add_carcasses(profile, records, cc_col=cfg.cc_col)
        profiles = profile if isinstance(profile, dict) else {None: profile}
        out = Path(cfg.out)
        for label, prof in profiles.items():
            save_profile(prof, (out / label if label else out) / PROFILE_DIR)
        if cfg.cc_col:
            _write_json({"cc_col": cfg.cc_col, "labels": list(profiles)}, out / STRATA_FILE)
        return profiles

    # ==================== FIT & FILTER ====================

    def _filter(self, directory: Path, profile, fits: Dict[ModelForm, FittedGLM], cfg: RunConfig):
        table = filter_models(fits, profile, cfg.filter_thresholds, n_jobs=cfg.n_jobs)
        _write_csv(table.to_frame(), directory / "scores.csv")
        _write_json({"selected": table.selected.value, "all_passed": table.all_passed}, directory / SELECTED_FILE)
        return table

    def fit(self, cfg: RunConfig) -> Dict[Optional[str], tuple]:
        results = {}
        for label, directory in self.strata(cfg.out):
            profile = load_profile(directory / PROFILE_DIR)
            fits = fit_battery(profile, cfg.forms, n_jobs=cfg.n_jobs)
            _write_json({f.value: fit.to_dict() for f, fit in fits.items()}, directory / FITS_FILE)
            _write_csv(aicc_table(fits), directory / "aicc.csv")
            stats = stats_table(fits, profile.srad)
            _write_csv(stats, directory / "stats.csv")
            grid = np.arange(max(int(profile.srad), CDF_GRID_MAX) + 1, dtype=float)
            _write_csv(cdf_table(fits, grid), directory / "cdf.csv")
            table = self._filter(directory, profile, fits, cfg)
            results[label] = (fits, table, stats)
        return results

    def load_fits(self, directory: Path) -> Dict[ModelForm, FittedGLM]:
        data = _read_json(directory / FITS_FILE)
        return {ModelForm.parse(name): FittedGLM.from_dict(d) for name, d in data.items()}

    def refilter(self, cfg: RunConfig):
        results = {}
        for label, directory in self.strata(cfg.out):
            profile = load_profile(directory / PROFILE_DIR)
            results[label] = self._filter(directory, profile, self.load_fits(directory), cfg)
        return results

    # ==================== COVERAGE ====================

    def _chosen_form(self, directory: Path, cfg: RunConfig) -> ModelForm:
        if cfg.model:
            return ModelForm.parse(cfg.model)
        return ModelForm.parse(_read_json(directory / SELECTED_FILE)["selected"])

    def psi(self, cfg: RunConfig) -> Dict[Optional[str], PsiDraws]:
        results = {}
        for label, directory in self.strata(cfg.out):
            profile = load_profile(directory / PROFILE_DIR)
            fits = self.load_fits(directory)
            form = self._chosen_form(directory, cfg)
            if form not in fits:
                raise SchemaError(f"Model '{form.value}' was not fitted", column="model")
            psi = est_psi(profile, fits[form], cfg.nsim, cfg.seed)
            _write_csv(psi.draws, directory / "psi.csv")
            _write_json({"form": form.value, "seed": cfg.seed, "fraction_missing": psi.fraction_missing},
                        directory / "psi_meta.json")
            results[label] = psi
        return results

    def load_psi(self, directory: Path) -> PsiDraws:
        meta = _read_json(directory / "psi_meta.json")
        draws = pd.read_csv(directory / "psi.csv", float_precision="round_trip")
        draws.columns = [str(c) for c in draws.columns]
        return PsiDraws(draws=draws, form=ModelForm.parse(meta["form"]), seed=meta.get("seed"),
                        fraction_missing=meta.get("fraction_missing", 0.0))

    def dwp(self, cfg: RunConfig) -> Dict[Optional[str], DwpDraws]:
        results = {}
        for label, directory in self.strata(cfg.out):
            profile = load_profile(directory / PROFILE_DIR)
            dwp = est_dwp(self.load_psi(directory), profile.ncarc, cfg.seed)
            _write_csv(dwp.draws, directory / "dwp.csv")
            _write_json({"form": dwp.form.value, "seed": cfg.seed, "ncarc": dwp.ncarc,
                         "zero_count_units": list(dwp.zero_count_units)}, directory / "dwp_meta.json")
            results[label] = dwp
        return results

    def load_dwp(self, directory: Path) -> DwpDraws:
        meta = _read_json(directory / "dwp_meta.json")
        draws = pd.read_csv(directory / "dwp.csv", float_precision="round_trip")
        draws.columns = [str(c) for c in draws.columns]
        return DwpDraws(draws=draws, ncarc=meta["ncarc"], form=ModelForm.parse(meta["form"]),
                        seed=meta.get("seed"), zero_count_units=tuple(meta.get("zero_count_units", ())))

    def export(self, cfg: RunConfig, path: Optional[Path] = None) -> Path:
        strata = self.strata(cfg.out)
        if strata[0][0] is None:
            source = self.load_dwp(strata[0][1])
        else:
            source = {label: self.load_dwp(directory) for label, directory in strata}
        table = format_genest(source, cfg.mode, cfg.round_digits)
        return export_genest(table, path or Path(cfg.out) / "genest.csv", cfg.round_digits)

    # ==================== SIMULATION ====================

    def simulate(self, scenario: ScenarioConfig, out: Path, pipeline: bool = False,
                 n_jobs: int = 1, verbose: bool = False) -> Tuple[ScenarioResult, Optional[pd.DataFrame]]:
        out = Path(out) / scenario.label
        result = run_scenario(scenario, n_jobs=n_jobs, verbose=verbose)
        _write_csv(result.carcasses, out / "carcasses.csv")
        summary = result.summary.assign(scenario=scenario.label, true_psi=result.true_psi)
        _write_csv(summary[["scenario", "replicate", "true_psi", "found_count", "skipped"]], out / "summary.csv")
        accuracy = None
        if pipeline:
            report = psi_accuracy_harness(scenario, result=result, verbose=verbose)
            accuracy = report.summary
            _write_csv(report.records, out / "psi_hat.csv")
            _write_csv(accuracy, out / "psi_accuracy.csv")
        return result, accuracy
