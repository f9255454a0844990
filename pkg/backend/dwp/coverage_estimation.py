"""Search coverage: psi from the fitted density, dwp from the posterior of M.

psi is the probability that a carcass lands in the searched area. dwp is the
realized fraction m_in / M, where the total M is drawn from its posterior
given the in-plot count m_in and psi.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import special, stats

from .config.enums import ExportMode, ModelForm
from .distance_distributions import DistanceDraws, draws_from_coefficients, extensible
from .errors import (
    DwpIOError, EstimationFailedError, InvalidArgumentError, NotExtensibleError,
)
from .glm_engine import FittedGLM, simulate_coefficients
from .ring_profile import TOTAL, GridProfile, RingProfile

logger = logging.getLogger(__name__)

TAIL_MASS = 1e-12
MAX_CELLS = 2_000_000
MAX_MISSED = 1_000_000  # widest grid of unfound carcasses


@dataclass
class PsiDraws:
    """nsim x (turbines + total) matrix of simulated psi; row 0 is the MLE"""
    draws: pd.DataFrame
    form: ModelForm
    seed: Optional[int] = None
    fraction_missing: float = 0.0

    @property
    def units(self):
        return list(self.draws.columns)

    @property
    def turbines(self):
        return [c for c in self.draws.columns if c != TOTAL]

    @property
    def nsim(self) -> int:
        return len(self.draws)

    def mle(self) -> pd.Series:
        return self.draws.iloc[0]


@dataclass
class DwpDraws:
    """Simulated dwp per turbine and for the site total"""
    draws: pd.DataFrame
    ncarc: Dict[str, int]
    form: ModelForm
    seed: Optional[int] = None
    zero_count_units: Tuple[str, ...] = ()

    @property
    def units(self):
        return list(self.draws.columns)

    @property
    def turbines(self):
        return [c for c in self.draws.columns if c != TOTAL]

    @property
    def nsim(self) -> int:
        return len(self.draws)


# ==================== PSI ====================

def _ring_psi(profile: RingProfile, dists) -> Dict[str, np.ndarray]:
    edges = np.arange(profile.srad + 1, dtype=float)
    ring_mass = np.diff(dists.cdf(edges), axis=1)
    return {unit: ring_mass @ profile.pinc(unit) for unit in profile.turbines + [TOTAL]}


def _grid_psi(profile: GridProfile, dists) -> Dict[str, np.ndarray]:
    area = profile.cell_size ** 2
    radii = np.unique(profile.cells["r"].to_numpy(dtype=float))
    positive = radii[radii > 0]
    dens = dists.pdf(positive) if len(positive) else np.zeros((len(dists), 0))
    per_radius = dict(zip(positive, (dens / (2 * math.pi * positive) * area).T))
    origin = dists.cdf(math.sqrt(area / math.pi))[:, 0]
    out = {}
    for turbine in profile.turbines:
        r = profile.turbine_cells(turbine)["r"].to_numpy(dtype=float)
        psi = np.zeros(len(dists))
        for value, count in zip(*np.unique(r, return_counts=True)):
            psi = psi + count * (origin if value <= 0 else per_radius[value])
        out[turbine] = psi
    out[TOTAL] = np.mean([out[t] for t in profile.turbines], axis=0)
    return out


def mle_psi(profile: Union[RingProfile, GridProfile], fit: FittedGLM) -> Dict[str, float]:
    """psi per unit at the fitted coefficients; NaN when the fit is not extensible"""
    dists = DistanceDraws(fit.form, fit.distance_beta[None, :])
    values = _grid_psi(profile, dists) if isinstance(profile, GridProfile) else _ring_psi(profile, dists)
    return {unit: float(np.clip(v[0], 0.0, 1.0)) if np.isfinite(v[0]) else math.nan
            for unit, v in values.items()}


def est_psi(profile: Union[RingProfile, GridProfile], fit: FittedGLM,
            nsim: int = 1000, seed=None) -> PsiDraws:
    """Integrate simulated densities over the searched area of each turbine"""
    if nsim < 1:
        raise InvalidArgumentError("nsim must be at least 1")
    if not fit.converged:
        raise EstimationFailedError(f"{fit.form.value} did not converge")
    if not extensible(fit.form, fit.distance_beta):
        raise NotExtensibleError(fit.form.value)
    coefficients = simulate_coefficients(fit, nsim, seed)
    coefficients[0] = fit.beta
    dists = draws_from_coefficients(fit, coefficients)
    if not dists.valid.any():
        raise EstimationFailedError(f"No extensible draws for {fit.form.value}")
    if isinstance(profile, GridProfile):
        values = _grid_psi(profile, dists)
    else:
        values = _ring_psi(profile, dists)
    frame = pd.DataFrame({unit: np.clip(v, 0.0, 1.0) for unit, v in values.items()})
    logger.info(f"Estimated psi with {fit.form.value}: {nsim} draws, "
                f"median total psi {np.nanmedian(frame[TOTAL]):.3f}")
    return PsiDraws(draws=frame, form=fit.form, seed=seed, fraction_missing=dists.fraction_invalid)


# ==================== POSTERIOR OF M ====================

def _log_prior(m):
    """Integrated reference prior, sqrt(m + 1) - sqrt(m)"""
    return -np.log(np.sqrt(m + 1.0) + np.sqrt(m))


def _missed_bound(m_in: int, psi):
    """Upper TAIL_MASS quantile of the unfound count M - m_in

    Under a flat prior M - m_in is negative binomial(m_in + 1, psi); the
    decreasing reference prior only pulls mass toward m_in.
    """
    return stats.nbinom.ppf(1 - TAIL_MASS, m_in + 1, psi)


def _cap(m_in: int, psi: float) -> int:
    if psi >= 1:
        return m_in
    return m_in + int(min(_missed_bound(m_in, psi), MAX_MISSED))


def _check_posterior_args(m_in, psi):
    if m_in < 0 or int(m_in) != m_in:
        raise InvalidArgumentError(f"m_in must be a non-negative integer, got {m_in}")
    if not (psi > 0) or psi > 1:
        raise InvalidArgumentError(f"psi must lie in (0, 1], got {psi}")


def posterior_m(m_in: int, psi: float) -> Tuple[np.ndarray, np.ndarray]:
    """(support, pmf) of M given m_in carcasses found with coverage psi"""
    _check_posterior_args(m_in, psi)
    m_in = int(m_in)
    if psi == 1:
        return np.array([m_in]), np.array([1.0])
    if _missed_bound(m_in, psi) > MAX_MISSED:
        logger.warning(f"Posterior of M for psi={psi:.3g} truncated at {m_in + MAX_MISSED}")
    support = np.arange(m_in, _cap(m_in, psi) + 1)
    logp = stats.binom.logpmf(m_in, support, psi) + _log_prior(support)
    pmf = np.exp(logp - special.logsumexp(logp))
    tail = np.cumsum(pmf[::-1])[::-1]
    beyond = np.flatnonzero(tail < TAIL_MASS)
    if len(beyond):
        stop = beyond[0]
        support, pmf = support[:stop], pmf[:stop]
        pmf = pmf / pmf.sum()
    return support, pmf


def credible_interval(support: Sequence[int], pmf: Sequence[float], level: float = 0.9) -> Tuple[int, int]:
    """Credible bounds for a discrete posterior

    The lower bound is the first value whose strict left tail reaches
    (1 - level) / 2; the upper bound is the first value whose cumulative mass
    reaches 1 - (1 - level) / 2.
    """
    if not 0 < level < 1:
        raise InvalidArgumentError("level must lie in (0, 1)")
    support = np.asarray(support)
    pmf = np.asarray(pmf, dtype=float) / np.sum(pmf)
    alpha = (1 - level) / 2
    cum = np.cumsum(pmf)
    hi = support[min(np.searchsorted(cum, 1 - alpha - 1e-12), len(support) - 1)]
    left = cum - pmf
    reached = np.flatnonzero(left >= alpha - 1e-12)
    lo = support[reached[0]] if len(reached) else hi
    return int(min(lo, hi)), int(hi)


def sample_m(m_in: int, psi: np.ndarray, rng) -> np.ndarray:
    """One posterior draw of M per psi value; NaN psi gives NaN

    psi too small for a grid uses the limit M * psi ~ Gamma(m_in + 1/2).
    """
    psi = np.asarray(psi, dtype=float)
    out = np.full(psi.shape, np.nan)
    ok = np.flatnonzero(np.isfinite(psi) & (psi > 0))
    wide = _missed_bound(m_in, np.minimum(psi[ok], 1.0)) > MAX_MISSED
    tiny, ok = ok[wide], ok[~wide]
    u = rng.random(len(ok))
    if len(tiny):
        m = np.round(rng.gamma(m_in + 0.5, size=len(tiny)) / psi[tiny])
        out[tiny] = np.maximum(m, m_in)
    order = ok[np.argsort(psi[ok], kind="mergesort")]
    u_sorted = u[np.argsort(psi[ok], kind="mergesort")]
    start = 0
    while start < len(order):
        cap = _cap(m_in, float(min(psi[order[start]], 1.0)))
        width = cap - m_in + 1
        rows = max(1, MAX_CELLS // width)
        index = order[start:start + rows]
        p = np.minimum(psi[index], 1.0)[:, None]
        support = np.arange(m_in, cap + 1)
        with np.errstate(divide="ignore"):
            logp = stats.binom.logpmf(m_in, support[None, :], p) + _log_prior(support)
        cdf = np.cumsum(np.exp(logp - special.logsumexp(logp, axis=1, keepdims=True)), axis=1)
        pick = (cdf < u_sorted[start:start + rows, None]).sum(axis=1)
        out[index] = support[np.minimum(pick, width - 1)]
        start += rows
    return out


def est_dwp(psi: PsiDraws, ncarc: Dict[str, int], seed=None) -> DwpDraws:
    """dwp draws: ncarc / M with M from its posterior under each psi draw"""
    missing = [u for u in psi.units if u not in ncarc]
    if missing:
        raise InvalidArgumentError(f"No carcass count for {missing}")
    streams = np.random.SeedSequence(seed).spawn(len(psi.units))
    columns = {}
    zero = []
    for unit, stream in zip(psi.units, streams):
        values = psi.draws[unit].to_numpy(dtype=float)
        count = int(ncarc[unit])
        if count == 0:
            zero.append(unit)
            columns[unit] = values.copy()
            continue
        m = sample_m(count, values, np.random.default_rng(stream))
        columns[unit] = count / m
    if zero:
        logger.warning(f"No carcasses at {zero}: dwp set equal to psi")
    frame = pd.DataFrame(columns)
    logger.info(f"Estimated dwp for {len(psi.units)} unit(s) from {psi.nsim} draws")
    return DwpDraws(draws=frame, ncarc={u: int(ncarc[u]) for u in psi.units},
                    form=psi.form, seed=seed, zero_count_units=tuple(zero))


# ==================== SUMMARIES & EXPORT ====================

def dwp_summary(draws: Union[PsiDraws, DwpDraws], probs: Sequence[float] = (0.05, 0.5, 0.95)) -> pd.DataFrame:
    """Quantiles per unit, ignoring missing draws"""
    frame = draws.draws
    records = []
    for unit in frame.columns:
        values = frame[unit].to_numpy(dtype=float)
        record = {"unit": unit}
        for p in probs:
            record[f"{p:.0%}"] = float(np.nanquantile(values, p))
        record["mean"] = float(np.nanmean(values))
        records.append(record)
    return pd.DataFrame.from_records(records)


def format_genest(dwp: Union[DwpDraws, Dict[str, DwpDraws]], mode: Union[ExportMode, str] = ExportMode.POINT,
                  round_digits: int = 3) -> pd.DataFrame:
    """Table for GenEst: turbine + one dwp column (or one column per carcass class)"""
    mode = ExportMode(mode) if not isinstance(mode, ExportMode) else mode
    by_class = dwp if isinstance(dwp, dict) else {"dwp": dwp}
    first = next(iter(by_class.values()))
    turbines = first.turbines
    columns = {}
    for label in sorted(by_class) if isinstance(dwp, dict) else ["dwp"]:
        frame = by_class[label].draws[turbines]
        if mode is ExportMode.POINT:
            columns[label] = frame.median(axis=0, skipna=True).to_numpy()
        else:
            columns[label] = frame.to_numpy(dtype=float).ravel()
    if mode is ExportMode.POINT:
        table = pd.DataFrame({"turbine": turbines})
    else:
        table = pd.DataFrame({"turbine": np.tile(turbines, first.nsim)})
    for label, values in columns.items():
        table[label] = np.round(values, round_digits)
    return table


def combine_genest(tables: Iterable[pd.DataFrame]) -> pd.DataFrame:
    """Row-bind tables from separately fitted strata"""
    tables = list(tables)
    if not tables:
        raise InvalidArgumentError("Nothing to combine")
    header = list(tables[0].columns)
    for table in tables[1:]:
        if list(table.columns) != header:
            raise InvalidArgumentError(f"Column mismatch: {list(table.columns)} vs {header}")
    return pd.concat(tables, ignore_index=True)


def export_genest(table: pd.DataFrame, path: Union[str, Path], round_digits: int = 3) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format=f"%.{round_digits}f",
                     na_rep="NA", lineterminator="\n", encoding="utf-8")
    except OSError as err:
        raise DwpIOError(f"Cannot write GenEst file: {err}", path=path) from err
    logger.info(f"Wrote GenEst dwp table to {path} ({len(table)} rows)")
    return path
