r"""Maximum likelihood for the BBS law with complete or right-censored data.

``delta`` is treated as a tuning constant: for each value on a grid
(integers -20..20 by default) the likelihood is maximised over
``(alpha, beta)``, and the grid value with the largest maximum wins.

Per event the log-density derivatives are

.. math::

    \partial_j \log f = -W a_j + c_j, \qquad
    \partial_{jk} \log f = V a_j a_k - W a_{jk} + c_{jk},

with ``D = 1 + (1 - delta a)^2``, ``W = 2 delta (1 - delta a) / D + a`` and
``V = (2 delta^2 D - 4 delta^2 (1 - delta a)^2) / D^2 - 1``.  Censored
records contribute ``log S(a)`` whose derivatives follow from the ASN
hazard ``lambda(a) = g(a) / (1 - G(a))`` and ``lambda' = lambda (lambda - W)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as _stats

from .bbs import BbsParams, asn_logpdf, asn_logsf
from .competitors import model_fit
from .errors import DomainError, FitError, OptimizationError
from .numerics import OptimizerSettings, minimize
from .observations import Observation, as_arrays  # noqa: F401  (re-exported)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
DEFAULT_DELTAS = tuple(float(d) for d in range(-20, 21))
K_BBS = 3


@dataclass
class FitResult:
    """BBS fit: estimates, standard errors and selection criteria.

    ``k = 3`` free parameters enter AIC and BIC even though ``delta`` is
    chosen from a grid.  ``se_alpha`` and ``se_beta`` are ``nan`` when the
    observed information is not positive definite.
    """

    params: BbsParams
    se_alpha: float
    se_beta: float
    delta_profiled: bool
    loglik: float
    aic: float
    bic: float
    converged: bool
    iterations: int
    n: int
    profile_trace: List[Tuple[float, float]] = field(default_factory=list)
    covariance: Optional[np.ndarray] = None
    refinement: Optional["FitResult"] = None

    @property
    def se_available(self) -> bool:
        return math.isfinite(self.se_alpha) and math.isfinite(self.se_beta)


@dataclass
class ProfileGrid:
    """Grid of ``delta`` values and, once evaluated, the sub-fit at each."""

    delta_values: Tuple[float, ...] = DEFAULT_DELTAS
    fits: List[Optional[FitResult]] = field(default_factory=list)

    def __post_init__(self):
        vals = tuple(float(d) for d in self.delta_values)
        if not vals:
            raise DomainError("delta grid must be nonempty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise DomainError("delta grid must be strictly ascending")
        self.delta_values = vals

    @classmethod
    def from_range(cls, lo: float, hi: float, step: float = 1.0) -> "ProfileGrid":
        m = int(round((hi - lo) / step))
        return cls(tuple(float(np.round(lo + i * step, 12)) for i in range(m + 1)))


@dataclass
class LrTest:
    """``LR = -2 (loglik_BS - loglik_BBS)`` against the chi-square(1) 5% point."""

    statistic: float
    critical_value: float
    reject_at_5pct: bool


# ---------------------------------------------------------------------------
# log-likelihood and derivatives
# ---------------------------------------------------------------------------


def _pieces(t, p):
    al, be, d = p.alpha, p.beta, p.delta
    r = np.sqrt(t / be)
    a = (r - 1.0 / r) / al
    a_al = -a / al
    a_be = -(r + 1.0 / r) / (2.0 * al * be)
    return a, a_al, a_be


def _evaluate(t, ev, p, order=0):
    """Log-likelihood and, for ``order >= 1``, its gradient / Hessian in (alpha, beta)."""
    al, be, d = p.alpha, p.beta, p.delta
    a, a_al, a_be = _pieces(t, p)
    te, ae = t[ev], a[ev]
    ac = a[~ev]
    D_e = 1.0 + (1.0 - d * ae) ** 2
    ll = float(np.sum(np.log(D_e) - 0.5 * ae * ae + np.log(te + be) - 1.5 * np.log(te)))
    ll += te.size * (-math.log(2.0 + d * d) - _LOG_SQRT_2PI - math.log(2.0 * al) - 0.5 * math.log(be))
    if ac.size:
        logsf_c = asn_logsf(ac, p.asn)
        ll += float(np.sum(logsf_c))
    if order == 0:
        return ll
    # events
    W_e = 2.0 * d * (1.0 - d * ae) / D_e + ae
    g = np.zeros(2)
    g[0] = np.sum(-W_e * a_al[ev]) - te.size / al
    g[1] = np.sum(-W_e * a_be[ev] + 1.0 / (te + be)) - te.size / (2.0 * be)
    if ac.size:
        lam = np.exp(asn_logpdf(ac, p.asn) - logsf_c)
        g[0] -= np.sum(lam * a_al[~ev])
        g[1] -= np.sum(lam * a_be[~ev])
    if order == 1:
        return ll, g
    r = np.sqrt(t / be)
    a_alal = 2.0 * a / al ** 2
    a_albe = -a_be / al
    a_bebe = (3.0 * r + 1.0 / r) / (4.0 * al * be ** 2)
    H = np.zeros((2, 2))
    V_e = (2 * d * d * D_e - 4 * d * d * (1 - d * ae) ** 2) / D_e ** 2 - 1.0
    ja, jb = a_al[ev], a_be[ev]
    H[0, 0] = np.sum(V_e * ja * ja - W_e * a_alal[ev]) + te.size / al ** 2
    H[0, 1] = np.sum(V_e * ja * jb - W_e * a_albe[ev])
    H[1, 1] = np.sum(V_e * jb * jb - W_e * a_bebe[ev] - 1.0 / (te + be) ** 2) + te.size / (2 * be * be)
    if ac.size:
        D_c = 1.0 + (1.0 - d * ac) ** 2
        W_c = 2.0 * d * (1.0 - d * ac) / D_c + ac
        lam1 = lam * (lam - W_c)
        ca, cb = a_al[~ev], a_be[~ev]
        H[0, 0] -= np.sum(lam1 * ca * ca + lam * a_alal[~ev])
        H[0, 1] -= np.sum(lam1 * ca * cb + lam * a_albe[~ev])
        H[1, 1] -= np.sum(lam1 * cb * cb + lam * a_bebe[~ev])
    H[1, 0] = H[0, 1]
    return ll, g, H


def _complete_arrays(data):
    t, ev = as_arrays(data)
    if not np.all(ev):
        raise DomainError("complete-data likelihood needs every observation to be an event")
    return t, ev


def _finite_or_raise(val):
    if not math.isfinite(val):
        raise DomainError("log-likelihood is not finite at these parameters")
    return val


def loglik_complete(data, p: BbsParams) -> float:
    """Sum of BBS log-densities, constants included."""
    t, ev = _complete_arrays(data)
    with np.errstate(all="ignore"):
        return _finite_or_raise(_evaluate(t, ev, p))


def score_complete(data, p: BbsParams) -> np.ndarray:
    """Analytic ``(d/d alpha, d/d beta)`` of :func:`loglik_complete`."""
    t, ev = _complete_arrays(data)
    return _evaluate(t, ev, p, order=1)[1]


def loglik_censored(data, p: BbsParams) -> float:
    """Event log-densities plus censored log-survivals."""
    t, ev = as_arrays(data)
    with np.errstate(all="ignore"):
        return _finite_or_raise(_evaluate(t, ev, p))


def score_censored(data, p: BbsParams) -> np.ndarray:
    t, ev = as_arrays(data)
    return _evaluate(t, ev, p, order=1)[1]


def observed_information(data, p: BbsParams) -> np.ndarray:
    """Negative Hessian of the log-likelihood in ``(alpha, beta)``, delta held fixed."""
    t, ev = as_arrays(data)
    return -_evaluate(t, ev, p, order=2)[2]


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _start(t):
    cv = float(np.std(t, ddof=1) / np.mean(t)) if t.size > 1 else 0.5
    return np.log([float(np.clip(cv, 0.05, 4.0)), float(np.median(t))])


def _make_result(t, ev, p, res, profiled, trace=()):
    n = int(t.size)
    ll = _evaluate(t, ev, p)
    info = -_evaluate(t, ev, p, order=2)[2]
    se_a = se_b = float("nan")
    cov = None
    if np.all(np.isfinite(info)):
        try:
            np.linalg.cholesky(info)
            cov = np.linalg.inv(info)
            se_a, se_b = (float(math.sqrt(v)) for v in np.diag(cov))
        except np.linalg.LinAlgError:
            cov = None
    return FitResult(p, se_a, se_b, profiled, ll, -2 * ll + 2 * K_BBS, -2 * ll + K_BBS * math.log(n),
                     bool(res.converged), int(res.iterations), n, list(trace), cov)


def _screened_starts(t, ev, delta, keep=2):
    """The CV/median start plus the best points of a coarse ``(alpha, beta)`` screen.

    For large ``|delta|`` the likelihood in ``(alpha, beta)`` can have
    several local maxima (each data cluster may sit under either mode), so
    one start is not enough.
    """
    base = _start(t)
    alphas = math.exp(base[0]) * np.array([0.25, 0.5, 1.0, 2.0])
    betas = np.quantile(t, [0.1, 0.25, 0.5, 0.75, 0.9])
    scored = []
    with np.errstate(all="ignore"):
        for al in alphas:
            for be in betas:
                ll = _evaluate(t, ev, BbsParams(float(al), float(be), delta))
                if math.isfinite(ll):
                    scored.append((ll, (math.log(al), math.log(be))))
    scored.sort(key=lambda s: -s[0])
    starts = [base]
    for _, x in scored[:keep]:
        if not any(np.allclose(x, s) for s in starts):
            starts.append(np.array(x))
    return starts


def _fit_delta(t, ev, delta, start=None, settings=None):
    n = t.size

    def unpack(x):
        return BbsParams(math.exp(x[0]), math.exp(x[1]), delta)

    def nll(x):
        try:
            p = unpack(x)
        except (DomainError, OverflowError):
            return math.inf
        with np.errstate(all="ignore"):
            return -_evaluate(t, ev, p) / n

    def grad(x):
        p = unpack(x)
        with np.errstate(all="ignore"):
            g = _evaluate(t, ev, p, order=1)[1]
        return -np.array([g[0] * p.alpha, g[1] * p.beta]) / n

    opts = settings or OptimizerSettings(max_iterations=500, gradient_tolerance=1e-8)
    starts = [np.log(start)] if start is not None else _screened_starts(t, ev, delta)
    best = None
    for x0 in starts:
        try:
            res = minimize(nll, x0, gradient=grad, settings=opts)
        except OptimizationError:
            continue
        # a line search that stalls at a stationary point is a converged fit
        if not res.converged and np.all(np.isfinite(res.grad)) and np.max(np.abs(res.grad)) < 1e-5:
            res.converged = True
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise OptimizationError("objective not finite at any start")
    return unpack(best.x), best


def fit_fixed_delta(data, delta: float, start: Optional[Tuple[float, float]] = None,
                    settings: Optional[OptimizerSettings] = None) -> FitResult:
    """Maximise the (censored) likelihood over ``(alpha, beta)`` at a given ``delta``.

    Raises
    ------
    FitError
        If the optimiser cannot leave a non-finite region or the maximum is not finite.
    """
    t, ev = as_arrays(data)
    if t.size < 4 or np.count_nonzero(ev) < 2:
        raise FitError("need at least 4 observations with at least 2 events")
    try:
        p, res = _fit_delta(t, ev, float(delta), start, settings)
    except OptimizationError as exc:
        raise FitError(f"fit at delta={delta} failed: {exc}", {"delta": delta}) from exc
    if not math.isfinite(res.fun):
        raise FitError(f"non-finite optimum at delta={delta}", {"delta": delta})
    return _make_result(t, ev, p, res, profiled=False)


def _as_grid(grid):
    if grid is None:
        return ProfileGrid()
    if isinstance(grid, ProfileGrid):
        return ProfileGrid(grid.delta_values)
    return ProfileGrid(tuple(grid))


def profile_fits(data, grid=None, settings: Optional[OptimizerSettings] = None) -> ProfileGrid:
    """Run the ``(alpha, beta)`` sub-fit at every grid value of ``delta``.

    Failed sub-fits are stored as ``None`` and reported with a warning.
    """
    g = _as_grid(grid)
    t, ev = as_arrays(data)
    fits: List[Optional[FitResult]] = []
    failed = []
    for d in g.delta_values:
        try:
            fits.append(fit_fixed_delta((t, ev), d, settings=settings))
        except FitError:
            fits.append(None)
            failed.append(d)
    if failed:
        warnings.warn(f"profile sub-fits failed at delta in {failed}")
    g.fits = fits
    return g


def _select(grid: ProfileGrid) -> int:
    best = None
    for i, (d, f) in enumerate(zip(grid.delta_values, grid.fits)):
        if f is None:
            continue
        if (best is None or f.loglik > grid.fits[best].loglik
                or (f.loglik == grid.fits[best].loglik and abs(d) < abs(grid.delta_values[best]))):
            best = i
    if best is None:
        raise FitError("every profile sub-fit failed", {"deltas": list(grid.delta_values)})
    return best


def fit_profile(data, grid=None, refine: bool = False,
                settings: Optional[OptimizerSettings] = None) -> FitResult:
    """Two-step fit: maximise over ``(alpha, beta)`` per grid ``delta``, keep the best.

    Parameters
    ----------
    data : observations, ``(times, events)`` pair or array of times
    grid : ProfileGrid or sequence of float, optional
        Defaults to the integers -20..20.
    refine : bool
        Also search a 0.1-spaced grid within one unit of the winner; the
        result goes to ``refinement`` and does not replace the main fit.

    Ties of the profile maximum go to the smaller ``|delta|``.
    """
    t, ev = as_arrays(data)
    if t.size < 4 or np.count_nonzero(ev) < 2:
        raise FitError("need at least 4 observations with at least 2 events")
    g = profile_fits((t, ev), grid, settings)
    i = _select(g)
    trace = [(d, f.loglik) for d, f in zip(g.delta_values, g.fits) if f is not None]
    best = g.fits[i]
    best.delta_profiled = True
    best.profile_trace = trace
    if refine:
        d0 = g.delta_values[i]
        sub = ProfileGrid.from_range(d0 - 1.0, d0 + 1.0, 0.1)
        best.refinement = fit_profile((t, ev), sub, refine=False, settings=settings)
    return best


def lr_test_bs_vs_bbs(data, bbs_fit: Optional[FitResult] = None) -> LrTest:
    """Likelihood-ratio statistic of the classical BS model against the profiled BBS fit."""
    t, ev = as_arrays(data)
    bbs = bbs_fit or fit_profile((t, ev))
    bs = model_fit((t, ev), "bs")
    stat = max(-2.0 * (bs.loglik - bbs.loglik), 0.0)
    crit = float(_stats.chi2.ppf(0.95, 1))
    return LrTest(stat, crit, stat > crit)
