"""Plausibility filter over a fitted model battery.

Each converged model is flagged on extensibility, right tail, left tail,
AICc distance from the best model and sensitivity to single observations.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config.enums import ModelForm
from .config.filter_config import FilterThresholds
from .distance_distributions import extensible, normalize, truncated_cdf
from .errors import DwpError, NoViableModelError
from .glm_engine import Design, FittedGLM, build_design, delta_aicc, fit_poisson
from .ring_profile import GridProfile, RingProfile

logger = logging.getLogger(__name__)

FLAGS = ("extensible", "rtail", "ltail", "aicc", "hin")


# ==================== SINGLE TESTS ====================

def rtail_pass(cdf: Callable, thresholds: FilterThresholds) -> bool:
    """No more than the allowed mass beyond each distance"""
    return all(p >= 1.0 or 1.0 - float(cdf(d)) <= p for d, p in thresholds.rtail)


def ltail_pass(cdf: Callable, thresholds: FilterThresholds) -> bool:
    """No more than the allowed mass within each distance"""
    return all(p >= 1.0 or float(cdf(d)) <= p for d, p in thresholds.ltail)


def aicc_pass(delta: float, thresholds: FilterThresholds) -> bool:
    return math.isfinite(delta) and delta <= thresholds.aicc_max_delta


def _p_win(form, beta, srad):
    if not extensible(form, beta):
        return None
    return float(normalize(form, beta).cdf(float(srad)))


@dataclass
class InfluenceResult:
    passed: bool
    base_p_win: Optional[float]
    offending_rows: List[int] = field(default_factory=list)
    offending_distances: List[float] = field(default_factory=list)
    max_change: float = 0.0


def _refit_without(design: Design, row: int):
    """(converged, extensible, p_win) of the fit with one row removed"""
    try:
        fit = fit_poisson(design.drop(row))
    except DwpError:
        return False, False, None
    beta = fit.distance_beta
    return fit.converged, extensible(fit.form, beta), _p_win(fit.form, beta, design.srad)


def high_influence_test(fit: FittedGLM, profile: Union[RingProfile, GridProfile, None] = None,
                        thresholds: Optional[FilterThresholds] = None, n_jobs: int = 1) -> InfluenceResult:
    """Leave-one-out refits over rows holding carcasses"""
    thresholds = thresholds or FilterThresholds()
    design = fit.design
    if design is None:
        design = build_design(profile, fit.form)
    base_ext = extensible(fit.form, fit.distance_beta)
    base = _p_win(fit.form, fit.distance_beta, design.srad)
    if math.isinf(thresholds.hin_delta_pwin):
        return InfluenceResult(passed=True, base_p_win=base)
    rows = np.flatnonzero(design.y > 0)
    refits = Parallel(n_jobs=n_jobs)(delayed(_refit_without)(design, int(row)) for row in rows)

    offending, max_change = [], 0.0
    for row, (converged, ext, p_win) in zip(rows, refits):
        bad = not converged or ext != base_ext
        if not bad and base is not None:
            change = abs(p_win - base)
            max_change = max(max_change, change)
            bad = change > thresholds.hin_delta_pwin
        if bad:
            offending.append(int(row))
    return InfluenceResult(
        passed=not offending, base_p_win=base, offending_rows=offending,
        offending_distances=[float(design.x[i]) for i in offending], max_change=max_change,
    )


# ==================== SCORE TABLE ====================

@dataclass
class ModelScore:
    form: ModelForm
    extensible: int
    rtail: int
    ltail: int
    aicc: int
    hin: int
    delta_aicc: float
    influence: Optional[InfluenceResult] = field(default=None, repr=False)

    @property
    def flags(self) -> Tuple[int, ...]:
        return tuple(getattr(self, name) for name in FLAGS)

    @property
    def passes_all(self) -> bool:
        return all(self.flags)

    def rank_key(self):
        delta = self.delta_aicc if math.isfinite(self.delta_aicc) else math.inf
        return tuple(-f for f in self.flags) + (delta, self.form.value)


@dataclass
class ScoreTable:
    scores: List[ModelScore]
    selected: ModelForm
    all_passed: bool
    thresholds: FilterThresholds = field(default_factory=FilterThresholds)

    def __getitem__(self, form) -> ModelScore:
        form = ModelForm.parse(form) if not isinstance(form, ModelForm) else form
        for score in self.scores:
            if score.form is form:
                return score
        raise KeyError(form)

    @property
    def extensible_models(self) -> List[ModelForm]:
        return [s.form for s in self.scores if s.extensible]

    @property
    def non_extensible_models(self) -> List[ModelForm]:
        return [s.form for s in self.scores if not s.extensible]

    def to_frame(self) -> pd.DataFrame:
        records = [{"model": s.form.value, **dict(zip(FLAGS, s.flags)), "deltaAICc": s.delta_aicc}
                   for s in self.scores]
        return pd.DataFrame.from_records(records, columns=["model", *FLAGS, "deltaAICc"])


def _score(form: ModelForm, fit: FittedGLM, delta: float, srad: float,
           thresholds: FilterThresholds, n_jobs: int) -> ModelScore:
    beta = fit.distance_beta
    ext = extensible(form, beta)
    if ext:
        dist = normalize(form, beta)
        rtail = rtail_pass(dist.cdf, thresholds)
        ltail = ltail_pass(dist.cdf, thresholds)
    else:
        rtail = False

        def cdf(d):
            return truncated_cdf(form, beta, [d], srad)[0]
        ltail = ltail_pass(cdf, thresholds)
    influence = high_influence_test(fit, thresholds=thresholds, n_jobs=n_jobs)
    return ModelScore(
        form=form, extensible=int(ext), rtail=int(rtail), ltail=int(ltail),
        aicc=int(aicc_pass(delta, thresholds)), hin=int(influence.passed),
        delta_aicc=delta, influence=influence,
    )


def filter_models(fits: Dict[ModelForm, FittedGLM], profile: Union[RingProfile, GridProfile, None] = None,
                  thresholds: Optional[FilterThresholds] = None, n_jobs: int = 1) -> ScoreTable:
    """Score converged fits, rank them and pick the best model passing every test"""
    thresholds = thresholds or FilterThresholds()
    dropped = [form.value for form, fit in fits.items() if not fit.converged]
    if dropped:
        logger.warning(f"Excluding non-converged model(s) from the filter: {dropped}")
    converged = {form: fit for form, fit in fits.items() if fit.converged}
    if not converged:
        raise NoViableModelError()
    deltas = delta_aicc(converged)

    scores = []
    for form, fit in converged.items():
        if fit.design is None and profile is not None:
            fit.design = build_design(profile, form)
        srad = fit.design.srad if fit.design is not None else float(profile.srad)
        scores.append(_score(form, fit, deltas[form], srad, thresholds, n_jobs))
    scores.sort(key=ModelScore.rank_key)

    passing = [s for s in scores if s.passes_all]
    if passing:
        selected = passing[0].form
    else:
        selected = scores[0].form
        logger.warning(f"No model passed every test; using best partial match {selected.value} "
                       f"with flags {dict(zip(FLAGS, scores[0].flags))}")
    logger.info(f"Filter selected {selected.value}; "
                f"{len(passing)} of {len(scores)} model(s) passed every test")
    return ScoreTable(scores=scores, selected=selected, all_passed=bool(passing), thresholds=thresholds)
