"""Normalized carcass distance distributions.

A fitted form gives a radial kernel k(x) = x * exp(adjust(x) + p(x)). When the
kernel integrates to a finite value on its support the form is extensible and
k / integral is a probability density. Closed forms go through scipy.stats;
the remaining polynomial forms are integrated by composite Gauss-Legendre
quadrature.

Every evaluator takes either one DistanceDistribution or a DistanceDraws batch
(one row per simulated coefficient vector). Rows that are not extensible
evaluate to NaN.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import optimize, special, stats

from .config.enums import ModelForm, Term
from .errors import InvalidArgumentError, InvalidParametersError, NotExtensibleError

logger = logging.getLogger(__name__)

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
HEAD_EPS = 2.0 ** -40
UNIT_LIMIT = 2000.0
GROWTH = 1.02
TAIL_NATS = 50.0
SCAN_GRID = np.geomspace(1e-3, 1e7, 2000)
CHUNK = 64
BISECTIONS = 64
QUANTILES = (0.5, 0.75, 0.90, 0.95)


# ==================== KERNEL ====================

def _as_matrix(form: ModelForm, beta) -> np.ndarray:
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    n_terms = len(form.terms)
    if beta.shape[1] != n_terms:
        raise InvalidParametersError(
            f"{form.value} takes {n_terms} distance coefficient(s), got {beta.shape[1]}")
    return beta


@dataclass
class KernelCoefficients:
    """Coefficients of log k(x) = log*log(x) + inv/x + x1*x + x2*x^2 + x3*x^3 + log2*log(x)^2"""
    log: np.ndarray
    inv: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    log2: np.ndarray

    @classmethod
    def from_beta(cls, form: ModelForm, beta) -> "KernelCoefficients":
        beta = _as_matrix(form, beta)
        n = beta.shape[0]
        values = {term: np.zeros(n) for term in Term}
        for i, term in enumerate(form.terms):
            values[term] = beta[:, i]
        adjust = form.offset_adjust
        return cls(
            log=1.0 + values[Term.LOG] + adjust.log_power,
            inv=values[Term.INV],
            x1=values[Term.X1] + adjust.linear_rate,
            x2=values[Term.X2],
            x3=values[Term.X3],
            log2=values[Term.LOG2],
        )

    def rows(self, index) -> "KernelCoefficients":
        return KernelCoefficients(*(getattr(self, f)[index] for f in
                                    ("log", "inv", "x1", "x2", "x3", "log2")))

    def log_kernel(self, x):
        """log k at x; the leading axis of x indexes rows (or has length 1)"""
        x = np.asarray(x, dtype=float)
        shape = (-1,) + (1,) * (x.ndim - 1)

        def c(a):
            return a.reshape(shape)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = special.xlogy(c(self.log), x) + c(self.x1) * x + c(self.x2) * x ** 2 + c(self.x3) * x ** 3
            if np.any(self.inv != 0):
                out = out + np.where(c(self.inv) != 0, c(self.inv) / x, 0.0)
            if np.any(self.log2 != 0):
                out = out + np.where(c(self.log2) != 0, c(self.log2) * np.log(x) ** 2, 0.0)
        return out


def _check(value: float, op: str, threshold: float):
    if op == "<":
        return value < threshold
    return value > threshold


def extensible_mask(form: ModelForm, beta) -> np.ndarray:
    """Extensibility of each coefficient row, decided by sign conditions only"""
    form = ModelForm.parse(form) if not isinstance(form, ModelForm) else form
    beta = _as_matrix(form, beta)
    template = form.template
    if template.conditions is None:
        return np.zeros(beta.shape[0], dtype=bool)
    ok = np.all(np.isfinite(beta), axis=1)
    for term, op, threshold in template.conditions:
        ok &= _check(beta[:, template.term_index(term)], op, threshold)
    return ok


def extensible(form: Union[ModelForm, str], beta) -> bool:
    return bool(extensible_mask(form, beta)[0])


# ==================== CLOSED FORMS ====================

def _closed_rv(form: ModelForm, c: KernelCoefficients):
    """scipy.stats frozen family with (n, 1) parameter arrays"""
    name = form.template.closed_form

    def col(values, fallback=1.0):
        values = np.asarray(values, dtype=float)
        return np.where(np.isfinite(values) & (values > 0), values, fallback)[:, None]

    with np.errstate(divide="ignore", invalid="ignore"):
        if name == "gamma":
            return stats.gamma(a=col(c.log + 1), scale=col(-1.0 / c.x1))
        if name in ("rayleigh", "maxwell"):
            scale = col(np.sqrt(-1.0 / (2 * c.x2)))
            return stats.rayleigh(scale=scale) if name == "rayleigh" else stats.maxwell(scale=scale)
        if name == "lognorm":
            return stats.lognorm(s=col(np.sqrt(-1.0 / (2 * c.log2))),
                                 scale=col(np.exp(-(c.log + 1) / (2 * c.log2))))
        if name == "truncnorm":
            sigma = col(np.sqrt(-1.0 / (2 * c.x2)))
            mu = np.nan_to_num(-c.x1 / (2 * c.x2))[:, None]
            return stats.truncnorm(a=-mu / sigma, b=np.inf, loc=mu, scale=sigma)
        if name == "expon":
            return stats.expon(scale=col(-1.0 / c.x1))
        if name == "pareto":
            return stats.pareto(b=col(-(c.log + 1)))
        if name == "invgamma":
            return stats.invgamma(a=col(-(c.log + 1)), scale=col(-c.inv))
        if name == "invgauss":
            lam = col(-2 * c.inv)
            mean = col(np.sqrt(c.inv / c.x1))
            return stats.invgauss(mu=mean / lam, scale=lam)
    raise InvalidParametersError(f"No closed form for {form.value}")


# ==================== QUADRATURE ====================

def _panel_edges(lo: float, hi: float) -> np.ndarray:
    pieces = []
    if lo <= 0:
        dyadic = HEAD_EPS * 2.0 ** np.arange(41)
        pieces.append(dyadic[dyadic < hi])
        start = 1.0
    else:
        start = lo
    top = min(hi, UNIT_LIMIT)
    if top > start:
        pieces.append(np.arange(start, top, 1.0))
    if hi > UNIT_LIMIT:
        base = max(UNIT_LIMIT, start)
        count = int(math.ceil(math.log(hi / base) / math.log(GROWTH)))
        pieces.append(base * GROWTH ** np.arange(count + 1))
    pieces.append([hi])
    edges = np.unique(np.concatenate(pieces))
    return edges[edges <= hi]


def upper_limit(c: KernelCoefficients) -> np.ndarray:
    """Distance where the log-kernel has fallen TAIL_NATS below its maximum"""
    logk = c.log_kernel(np.broadcast_to(SCAN_GRID, (len(c.log), len(SCAN_GRID))))
    logk = np.where(np.isfinite(logk), logk, -np.inf)
    peak = logk.max(axis=1)
    above = logk >= (peak - TAIL_NATS)[:, None]
    last = len(SCAN_GRID) - 1 - np.argmax(above[:, ::-1], axis=1)
    return SCAN_GRID[np.minimum(last + 1, len(SCAN_GRID) - 1)]


class Quadrature:
    """Cumulative integral of exp(log k) on [lo, hi] for a block of rows"""

    def __init__(self, coef: KernelCoefficients, lo: float, hi: float):
        self.coef = coef
        self.lo = lo
        self.hi = hi
        self.edges = _panel_edges(lo, hi)
        a, b = self.edges[:-1], self.edges[1:]
        half = (b - a) / 2
        nodes = (a + b)[:, None] / 2 + half[:, None] * GL_NODES
        logk = coef.log_kernel(nodes[None])
        log_head = self._log_head()
        with np.errstate(invalid="ignore"):
            shift = np.maximum(np.nanmax(np.where(np.isfinite(logk), logk, -np.inf), axis=(1, 2)), log_head)
        self.shift = np.where(np.isfinite(shift), shift, 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            panels = np.sum(GL_WEIGHTS * np.exp(logk - self.shift[:, None, None]), axis=2) * half
            head = np.exp(log_head - self.shift)
        self.cum = np.concatenate([head[:, None], head[:, None] + np.cumsum(panels, axis=1)], axis=1)
        self.total = self.cum[:, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            self.log_norm = self.shift + np.log(self.total)

    def _log_head(self) -> np.ndarray:
        c = self.coef
        n = len(c.log)
        if self.lo > 0:
            return np.full(n, -np.inf)
        power = c.log + 1
        plain = (c.inv == 0) & (c.log2 == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            head = power * math.log(HEAD_EPS) - np.log(power)
        out = np.where(plain & (power > 0), head, np.nan)
        # an essential singularity with the right sign leaves nothing near 0
        vanishing = ((c.inv < 0) | ((c.inv == 0) & (c.log2 < 0)))
        return np.where(~plain & vanishing, -np.inf, out)

    def _partial(self, start, stop):
        """Integral (shifted) from start to stop, both shaped (n, m)"""
        width = stop - start
        nodes = start[..., None] + width[..., None] * (GL_NODES + 1) / 2
        logk = self.coef.log_kernel(nodes)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.exp(logk - self.shift[:, None, None])
        vals = np.where(np.isfinite(vals), vals, 0.0)
        return np.sum(GL_WEIGHTS * vals, axis=-1) * width / 2

    def cdf(self, x) -> np.ndarray:
        n = len(self.total)
        x = np.broadcast_to(np.asarray(x, dtype=float), (n, np.shape(x)[-1])) if np.ndim(x) else \
            np.full((n, 1), float(x))
        clipped = np.clip(x, self.edges[0], self.hi)
        n_panels = len(self.edges) - 1
        j = np.clip(np.searchsorted(self.edges, clipped, side="right") - 1, 0, n_panels - 1)
        start = self.edges[j]
        mass = np.take_along_axis(self.cum, j, axis=1) + self._partial(start, clipped)
        if self.lo <= 0:
            power = (self.coef.log + 1)[:, None]
            with np.errstate(invalid="ignore", divide="ignore"):
                head = self.cum[:, :1] * (np.maximum(x, 0.0) / HEAD_EPS) ** power
            mass = np.where(x < self.edges[0], head, mass)
        else:
            mass = np.where(x < self.lo, 0.0, mass)
        mass = np.where(x >= self.hi, self.total[:, None], mass)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.clip(mass / self.total[:, None], 0.0, 1.0)

    def ppf(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        target = p * self.total[:, None]
        n_panels = len(self.edges) - 1
        j = np.empty(target.shape, dtype=int)
        for row in range(target.shape[0]):
            j[row] = np.searchsorted(self.cum[row, 1:], target[row], side="right")
        j = np.clip(j, 0, n_panels - 1)
        start = self.edges[j]
        lo = start.copy()
        hi = self.edges[j + 1]
        need = target - np.take_along_axis(self.cum, j, axis=1)
        for _ in range(BISECTIONS):
            mid = (lo + hi) / 2
            below = self._partial(start, mid) < need
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = (lo + hi) / 2
        if self.lo <= 0:
            head = self.cum[:, :1]
            power = (self.coef.log + 1)[:, None]
            with np.errstate(invalid="ignore", divide="ignore"):
                inner = HEAD_EPS * (target / head) ** (1 / power)
            x = np.where(target < head, inner, x)
        x = np.where(p <= 0, self.lo if self.lo > 0 else 0.0, x)
        return np.where(p >= 1, np.inf, x)


# ==================== DISTRIBUTIONS ====================

class DistanceDraws:
    """A batch of coefficient rows for one form, normalized where extensible"""

    def __init__(self, form: ModelForm, beta):
        self.form = ModelForm.parse(form) if not isinstance(form, ModelForm) else form
        self.beta = _as_matrix(self.form, beta)
        self.valid = extensible_mask(self.form, self.beta)
        self.coef = KernelCoefficients.from_beta(self.form, self.beta)
        self.closed = self.form.template.closed_form is not None
        self._rv = None
        self._log_norm = None
        self._quadratures = None

    def __len__(self):
        return self.beta.shape[0]

    @property
    def support(self) -> Tuple[float, float]:
        return self.form.support_lo, math.inf

    @property
    def fraction_invalid(self) -> float:
        return float(1.0 - self.valid.mean()) if len(self) else 0.0

    @property
    def rv(self):
        if self._rv is None:
            self._rv = _closed_rv(self.form, self.coef)
        return self._rv

    def _blocks(self):
        """(row indices, Quadrature) per block of valid rows"""
        if self._quadratures is not None:
            yield from self._quadratures
            return
        rows = np.flatnonzero(self.valid)
        blocks = []
        for begin in range(0, len(rows), CHUNK):
            index = rows[begin:begin + CHUNK]
            coef = self.coef.rows(index)
            hi = float(upper_limit(coef).max())
            block = (index, Quadrature(coef, self.form.support_lo, hi))
            if len(self) <= CHUNK:
                blocks.append(block)
            yield block
        if len(self) <= CHUNK:
            self._quadratures = blocks

    def _fill(self, m, compute):
        out = np.full((len(self), m), np.nan)
        for index, quad in self._blocks():
            out[index] = compute(index, quad)
        return out

    @property
    def log_norm_const(self) -> np.ndarray:
        if self._log_norm is None:
            if self.closed:
                with np.errstate(all="ignore"):
                    x0 = self.rv.median()
                    lnc = self.coef.log_kernel(x0) - self.rv.logpdf(x0)
                lnc = lnc[:, 0]
            else:
                lnc = self._fill(1, lambda index, quad: quad.log_norm[:, None])[:, 0]
            self._log_norm = np.where(self.valid, lnc, np.nan)
        return self._log_norm

    def _mask(self, values):
        return np.where(self.valid[:, None], values, np.nan)

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.closed:
            with np.errstate(all="ignore"):
                return self._mask(self.rv.pdf(x[None, :]))
        logk = self.coef.log_kernel(np.broadcast_to(x, (len(self), len(x))))
        with np.errstate(over="ignore", invalid="ignore"):
            dens = np.exp(logk - self.log_norm_const[:, None])
        dens = np.where(x[None, :] < self.form.support_lo, 0.0, dens)
        return self._mask(np.where(x[None, :] < 0, 0.0, dens))

    def cdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.closed:
            with np.errstate(all="ignore"):
                return self._mask(self.rv.cdf(x[None, :]))
        return self._fill(len(x), lambda index, quad: quad.cdf(x[None, :]))

    def ppf(self, p) -> np.ndarray:
        """p is shared (m,) or per row (n, m)"""
        p = np.asarray(p, dtype=float)
        p = np.broadcast_to(np.atleast_2d(p), (len(self), np.atleast_1d(p).shape[-1]))
        if self.closed:
            with np.errstate(all="ignore"):
                return self._mask(self.rv.ppf(p))
        return self._fill(p.shape[1], lambda index, quad: quad.ppf(p[index]))

    def rvs(self, size: int, rng) -> np.ndarray:
        u = rng.random((len(self), int(size)))
        return self.ppf(u)


@dataclass
class DistanceDistribution:
    """Normalized extensible distance distribution"""
    form: ModelForm
    beta: np.ndarray
    log_norm_const: float
    extensible: bool = True
    support: Tuple[float, float] = (0.0, math.inf)
    batch: Optional[DistanceDraws] = field(default=None, repr=False, compare=False)

    def pdf(self, x):
        return _squeeze(self.batch.pdf(x)[0], x)

    def cdf(self, x):
        return _squeeze(self.batch.cdf(x)[0], x)

    def ppf(self, p):
        return _squeeze(self.batch.ppf(np.atleast_1d(p))[0], p)

    def to_dict(self):
        return {"form": self.form.value, "beta": [float(b) for b in self.beta],
                "log_norm_const": float(self.log_norm_const), "extensible": self.extensible}


def _squeeze(values, like):
    return float(values[0]) if np.ndim(like) == 0 else values


def normalize(form: Union[ModelForm, str], beta) -> DistanceDistribution:
    form = ModelForm.parse(form) if not isinstance(form, ModelForm) else form
    beta = _as_matrix(form, beta)[0]
    batch = DistanceDraws(form, beta[None, :])
    if not batch.valid[0]:
        raise NotExtensibleError(form.value)
    return DistanceDistribution(
        form=form, beta=beta, log_norm_const=float(batch.log_norm_const[0]),
        support=batch.support, batch=batch,
    )


def from_fit(fit) -> DistanceDistribution:
    return normalize(fit.form, fit.distance_beta)


def draws_from_coefficients(fit, coefficients: np.ndarray) -> DistanceDraws:
    """Batch over simulated full coefficient vectors (only distance terms matter)"""
    draws = DistanceDraws(fit.form, np.asarray(coefficients)[:, fit.distance_slice])
    if draws.fraction_invalid > 0:
        logger.warning(f"{draws.fraction_invalid:.1%} of {fit.form.value} draws are not extensible")
    return draws


def truncated_cdf(form: Union[ModelForm, str], beta, x, upper: float) -> np.ndarray:
    """CDF of the kernel normalized on [support_lo, upper]; usable for any form"""
    form = ModelForm.parse(form) if not isinstance(form, ModelForm) else form
    coef = KernelCoefficients.from_beta(form, beta)
    quad = Quadrature(coef, form.support_lo, float(upper))
    return quad.cdf(np.atleast_1d(np.asarray(x, dtype=float))[None, :])[0]


# ==================== EVALUATORS ====================

Dist = Union[DistanceDistribution, DistanceDraws]


def ddd(x, dist: Dist):
    """Density"""
    return dist.pdf(x)


def pdd(x, dist: Dist):
    """Cumulative distribution"""
    return dist.cdf(x)


def qdd(p, dist: Dist):
    """Quantile"""
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any((arr < 0) | (arr > 1)):
        raise InvalidArgumentError("Probabilities must lie in [0, 1]")
    return dist.ppf(p)


def rdd(n: int, dist: Dist, seed=None) -> np.ndarray:
    """Inverse-CDF samples: (n,) for one distribution, (nsim, n) for draws"""
    if n < 0:
        raise InvalidArgumentError("Sample size must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(dist, DistanceDistribution):
        return dist.batch.rvs(n, rng)[0]
    return dist.rvs(n, rng)


# ==================== SUMMARIES ====================

def distribution_mode(dist: DistanceDistribution) -> Tuple[float, bool]:
    """Argmax of the density on [support_lo, q0.999]; (mode, at lower boundary)"""
    lo = dist.support[0]
    hi = float(dist.ppf(0.999))
    grid = np.linspace(lo, hi, 2001)
    with np.errstate(divide="ignore"):
        logd = np.log(dist.pdf(grid))
    i = int(np.argmax(logd))
    if i == 0:
        return lo, True
    a, b = grid[i - 1], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda v: -math.log(max(dist.pdf(v), 1e-300)),
                                   bounds=(a, b), method="bounded", options={"xatol": 1e-6})
    mode = float(res.x) if -res.fun >= logd[i] else float(grid[i])
    return mode, False


def dist_stats(dist: DistanceDistribution, srad: float) -> Dict[str, float]:
    quantiles = dist.ppf(np.array(QUANTILES))
    mode, boundary = distribution_mode(dist)
    return {
        "median": float(quantiles[0]), "q75": float(quantiles[1]),
        "q90": float(quantiles[2]), "q95": float(quantiles[3]),
        "mode": mode, "mode_at_boundary": boundary,
        "p_win": float(dist.cdf(float(srad))),
    }


def stats_table(fits: Dict, srad: float) -> pd.DataFrame:
    """median 75% 90% 95% mode p_win deltaAICc for each extensible converged model"""
    from .glm_engine import delta_aicc

    deltas = delta_aicc(fits)
    records = []
    for form, fit in fits.items():
        if not fit.converged or not extensible(form, fit.distance_beta):
            continue
        s = dist_stats(from_fit(fit), srad)
        records.append({"model": form.value, "median": s["median"], "75%": s["q75"],
                        "90%": s["q90"], "95%": s["q95"], "mode": s["mode"],
                        "p_win": s["p_win"], "deltaAICc": deltas[form]})
    columns = ["model", "median", "75%", "90%", "95%", "mode", "p_win", "deltaAICc"]
    table = pd.DataFrame.from_records(records, columns=columns)
    return table.sort_values(["deltaAICc", "model"], kind="mergesort").reset_index(drop=True)


def cdf_table(fits: Dict, grid: Sequence[float]) -> pd.DataFrame:
    """CDF of each extensible converged model on a distance grid"""
    grid = np.asarray(grid, dtype=float)
    table = pd.DataFrame({"x": grid})
    for form, fit in fits.items():
        if fit.converged and extensible(form, fit.distance_beta):
            table[form.value] = from_fit(fit).cdf(grid)
    return table
