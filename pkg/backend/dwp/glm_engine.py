"""Poisson regression of ring (or cell) carcass counts on distance terms.

log E[ncarc] = a + class + p(x) + log(exposure) + adjust(x), fitted by
iteratively reweighted least squares.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import linalg, special

from .config.enums import ModelForm, OffsetAdjust, Term
from .errors import DegenerateInputError, SchemaError, SingularFitError
from .ring_profile import TOTAL, GridProfile, RingProfile

logger = logging.getLogger(__name__)

TOLERANCE = 1e-10
MAX_ITER = 100
MAX_HALVINGS = 30


def evaluate_term(term: Term, x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if term is Term.INV:
            return 1.0 / x
        if term is Term.LOG:
            return np.log(x)
        if term is Term.X1:
            return x
        if term is Term.X2:
            return x ** 2
        if term is Term.X3:
            return x ** 3
        return np.log(x) ** 2


def offset_adjustment(adjust: OffsetAdjust, x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        log_part = adjust.log_power * np.log(x) if adjust.log_power else 0.0
    return log_part + adjust.linear_rate * x


@dataclass(frozen=True)
class DesignSpec:
    form: ModelForm
    terms: Tuple[Term, ...]
    offset_adjust: OffsetAdjust = OffsetAdjust.NONE
    class_levels: Tuple[str, ...] = ()
    sc_var: Optional[str] = None

    @property
    def column_names(self) -> List[str]:
        names = ["a"]
        names += [f"{self.sc_var}{level}" for level in self.class_levels[1:]]
        names += [t.symbol for t in self.terms]
        return names

    @property
    def k_params(self) -> int:
        return 1 + max(len(self.class_levels) - 1, 0) + len(self.terms)


@dataclass
class Design:
    """Observation table for one form: response, regressors, offsets"""
    template: DesignSpec
    X: np.ndarray
    y: np.ndarray
    offset: np.ndarray
    x: np.ndarray
    labels: Optional[np.ndarray] = None
    srad: float = 0.0

    @property
    def n_obs(self) -> int:
        return len(self.y)

    def drop(self, row: int) -> "Design":
        keep = np.arange(self.n_obs) != row
        return Design(
            template=self.template, X=self.X[keep], y=self.y[keep], offset=self.offset[keep],
            x=self.x[keep], labels=None if self.labels is None else self.labels[keep], srad=self.srad,
        )


def _observations(profile, sc_var):
    if isinstance(profile, GridProfile):
        cells = profile.cells
        labels = cells[sc_var].astype(str).to_numpy() if sc_var else None
        return (cells["r"].to_numpy(dtype=float), cells["exposure"].to_numpy(dtype=float),
                cells["ncarc"].to_numpy(dtype=float), labels, float(profile.srad))
    rdat = profile.rdat[TOTAL]
    if not sc_var and profile.sc_var:
        rdat = rdat.groupby("r", sort=True)[["exposure", "ncarc"]].sum().reset_index()
    labels = rdat[sc_var].astype(str).to_numpy() if sc_var else None
    x = rdat["r"].to_numpy(dtype=float) - 0.5
    return (x, rdat["exposure"].to_numpy(dtype=float), rdat["ncarc"].to_numpy(dtype=float),
            labels, float(max(profile.turbine_srad.values(), default=profile.srad)))


def build_design(profile: Union[RingProfile, GridProfile], form: ModelForm,
                 sc_var: Optional[str] = None, use_classes: bool = True) -> Design:
    """One row per (ring or cell) x class with positive exposure"""
    form = ModelForm.parse(form) if not isinstance(form, ModelForm) else form
    if sc_var and sc_var != profile.sc_var:
        raise SchemaError(f"Profile has no search-class variable '{sc_var}'", column=sc_var)
    sc_var = (sc_var or profile.sc_var) if use_classes else None
    x, exposure, ncarc, labels, srad = _observations(profile, sc_var)

    keep = exposure > 0
    if form.support_lo > 0:
        keep &= x >= form.support_lo
    if form.needs_positive_x:
        origin = keep & (x <= 0)
        if origin.any():
            logger.warning(f"Dropping {int(origin.sum())} observation(s) at distance 0 for {form.value}")
            keep &= x > 0
    if not keep.any():
        raise DegenerateInputError(f"No observations with positive exposure for {form.value}")
    x, exposure, ncarc = x[keep], exposure[keep], ncarc[keep]
    labels = labels[keep] if labels is not None else None

    base = form.template
    levels = tuple(sorted(set(labels))) if labels is not None else ()
    template = DesignSpec(form=form, terms=base.terms, offset_adjust=base.offset_adjust,
                          class_levels=levels, sc_var=sc_var)
    columns = [np.ones_like(x)]
    columns += [(labels == level).astype(float) for level in levels[1:]]
    columns += [evaluate_term(term, x) for term in template.terms]
    X = np.column_stack(columns)
    offset = np.log(exposure) + offset_adjustment(template.offset_adjust, x)
    return Design(template=template, X=X, y=ncarc, offset=offset, x=x, labels=labels, srad=srad)


# ==================== FITTING ====================

@dataclass
class FittedGLM:
    form: ModelForm
    beta: np.ndarray
    cov: np.ndarray
    loglik: float
    aicc: float
    n_obs: int
    k_params: int
    converged: bool
    column_names: List[str] = field(default_factory=list)
    iterations: int = 0
    design: Optional[Design] = field(default=None, repr=False)

    @property
    def n_terms(self) -> int:
        return len(self.form.terms)

    @property
    def distance_beta(self) -> np.ndarray:
        """Coefficients of the distance terms, in template order"""
        return self.beta[self.k_params - self.n_terms:]

    @property
    def distance_slice(self) -> slice:
        return slice(self.k_params - self.n_terms, self.k_params)

    def to_dict(self):
        return {
            "form": self.form.value,
            "beta": [float(b) for b in self.beta],
            "cov": np.asarray(self.cov, dtype=float).tolist(),
            "loglik": float(self.loglik),
            "aicc": None if not math.isfinite(self.aicc) else float(self.aicc),
            "n_obs": int(self.n_obs),
            "k_params": int(self.k_params),
            "converged": bool(self.converged),
            "column_names": list(self.column_names),
            "iterations": int(self.iterations),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            form=ModelForm.parse(data["form"]),
            beta=np.asarray(data["beta"], dtype=float),
            cov=np.asarray(data["cov"], dtype=float).reshape(data["k_params"], data["k_params"]),
            loglik=float(data["loglik"]),
            aicc=math.inf if data.get("aicc") is None else float(data["aicc"]),
            n_obs=int(data["n_obs"]),
            k_params=int(data["k_params"]),
            converged=bool(data["converged"]),
            column_names=list(data.get("column_names", [])),
            iterations=int(data.get("iterations", 0)),
        )


def aicc_value(loglik: float, k: int, n: int) -> float:
    if n <= k + 1:
        return math.inf
    return -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1) / (n - k - 1)


def aicc(fit: FittedGLM) -> float:
    return aicc_value(fit.loglik, fit.k_params, fit.n_obs)


def log_likelihood(design: Design, beta) -> float:
    eta = design.X @ np.asarray(beta, dtype=float) + design.offset
    mu = np.exp(eta)
    return float(np.sum(special.xlogy(design.y, mu) - mu - special.gammaln(design.y + 1)))


def score(design: Design, beta) -> np.ndarray:
    """Gradient of the Poisson log-likelihood"""
    mu = np.exp(design.X @ np.asarray(beta, dtype=float) + design.offset)
    return design.X.T @ (design.y - mu)


def _deviance(y, mu) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(2.0 * np.sum(special.xlogy(y, y) - special.xlogy(y, mu) - (y - mu)))


def fit_poisson(design: Design, tol: float = TOLERANCE, max_iter: int = MAX_ITER) -> FittedGLM:
    """Maximum-likelihood fit; a fit that fails to settle is flagged, not raised"""
    y, offset = design.y, design.offset
    n, k = design.X.shape
    if y.sum() < 1:
        raise DegenerateInputError("All carcass counts are zero")
    if n < k:
        raise DegenerateInputError(f"{design.template.form.value} needs {k} observations, got {n}")

    # distance columns are scaled to unit max for conditioning
    scale = np.ones(k)
    n_terms = len(design.template.terms)
    if n_terms:
        tail = np.abs(design.X[:, k - n_terms:]).max(axis=0)
        scale[k - n_terms:] = np.where(tail > 0, tail, 1.0)
    Z = design.X / scale
    if np.linalg.matrix_rank(Z) < k:
        raise SingularFitError(f"Design for {design.template.form.value} is rank deficient")

    gamma = np.zeros(k)
    gamma[0] = math.log(y.sum() / np.exp(offset).sum())
    mu = np.exp(Z @ gamma + offset)
    dev = _deviance(y, mu)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        eta = Z @ gamma + offset
        working = eta - offset + (y - mu) / mu
        ZtW = Z.T * mu
        try:
            proposal = linalg.solve(ZtW @ Z, ZtW @ working, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            logger.warning(f"IRLS system became singular for {design.template.form.value}")
            break
        step = proposal - gamma
        for _ in range(MAX_HALVINGS):
            candidate = gamma + step
            with np.errstate(over="ignore"):
                mu_new = np.exp(Z @ candidate + offset)
            dev_new = _deviance(y, mu_new)
            if np.all(np.isfinite(mu_new)) and np.isfinite(dev_new) and dev_new <= dev * (1 + 1e-12) + 1e-12:
                break
            step = step / 2
        else:
            break
        change = abs(dev_new - dev) / (abs(dev_new) + 0.1)
        gamma, mu, dev = candidate, mu_new, dev_new
        if change < tol:
            converged = True
            break

    info = (Z.T * mu) @ Z
    try:
        cov_gamma = linalg.inv(info)
    except linalg.LinAlgError:
        cov_gamma = np.full((k, k), np.nan)
        converged = False
    beta = gamma / scale
    cov = cov_gamma / np.outer(scale, scale)
    cov = (cov + cov.T) / 2
    loglik = log_likelihood(design, beta)
    if not converged:
        logger.warning(f"{design.template.form.value} did not converge after {iteration} iterations")
    return FittedGLM(
        form=design.template.form, beta=beta, cov=cov, loglik=loglik,
        aicc=aicc_value(loglik, k, n), n_obs=n, k_params=k, converged=converged,
        column_names=design.template.column_names, iterations=iteration, design=design,
    )


def simulate_coefficients(fit: FittedGLM, nsim: int, seed=None) -> np.ndarray:
    """nsim x k draws from MVN(beta, cov)"""
    cov = np.asarray(fit.cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise SingularFitError(f"Covariance of {fit.form.value} is not finite")
    try:
        root = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigval, eigvec = np.linalg.eigh(cov)
        floor = -1e-12 * max(1.0, float(np.abs(eigval).max()))
        if eigval.min() < floor:
            raise SingularFitError(f"Covariance of {fit.form.value} is not positive semi-definite") from None
        root = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((int(nsim), len(fit.beta)))
    return fit.beta + normals @ root.T


# ==================== BATTERY ====================

def _fit_one(profile, form, sc_var):
    try:
        return form, fit_poisson(build_design(profile, form, sc_var))
    except (SingularFitError, DegenerateInputError) as err:
        logger.warning(f"Skipping {form.value}: {err.message}")
        return form, None


def fit_battery(profile: Union[RingProfile, GridProfile],
                forms: Optional[Iterable[Union[ModelForm, str]]] = None,
                sc_var: Optional[str] = None, n_jobs: int = 1) -> Dict[ModelForm, FittedGLM]:
    """Fit every requested form; singular or degenerate designs are omitted"""
    forms = [f if isinstance(f, ModelForm) else ModelForm.parse(f) for f in (forms or ModelForm.standard())]
    if profile.ncarc.get(TOTAL, 0) < 1:
        raise DegenerateInputError("Profile has no carcasses to fit")
    results = Parallel(n_jobs=n_jobs)(delayed(_fit_one)(profile, form, sc_var) for form in forms)
    fits = {form: fit for form, fit in results if fit is not None}
    n_conv = sum(fit.converged for fit in fits.values())
    logger.info(f"Fitted {len(fits)} of {len(forms)} model(s); {n_conv} converged")
    return fits


def delta_aicc(fits: Dict[ModelForm, FittedGLM]) -> Dict[ModelForm, float]:
    """AICc minus the best AICc; only the best model gets exactly 0

    Ties at the minimum go to the first form name; the other tied models get
    the smallest positive float.
    """
    converged = [(fit.aicc, form.value) for form, fit in fits.items()
                 if fit.converged and math.isfinite(fit.aicc)]
    if not converged:
        return {form: math.nan for form in fits}
    best, best_name = min(converged)
    deltas = {}
    for form, fit in fits.items():
        if not fit.converged:
            deltas[form] = math.nan
        elif form.value == best_name:
            deltas[form] = 0.0
        else:
            deltas[form] = max(fit.aicc - best, math.ulp(0.0))
    return deltas


def aicc_table(fits: Dict[ModelForm, FittedGLM]) -> pd.DataFrame:
    """model, k, loglik, AICc, deltaAICc and coefficients, best first"""
    deltas = delta_aicc(fits)
    records = []
    for form, fit in fits.items():
        record = {"model": form.value, "k": fit.k_params, "loglik": fit.loglik,
                  "AICc": fit.aicc, "deltaAICc": deltas[form], "converged": fit.converged}
        record.update(dict(zip(fit.column_names, fit.beta)))
        records.append(record)
    table = pd.DataFrame.from_records(records)
    if table.empty:
        return table
    return table.sort_values(["AICc", "model"], na_position="last", kind="mergesort").reset_index(drop=True)
