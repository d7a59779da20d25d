"""Comparison models: classical BS, log-normal, BBSO and a two-component BS mixture.

Every model exposes the same small surface through :func:`model_pdf`,
:func:`model_cdf`, :func:`model_sf`, :func:`model_logpdf`,
:func:`model_loglik`, :func:`model_sample` and :func:`model_fit`, which
dispatch on the parameter record type.

BBSO here is the law with density

.. math:: f(t) = \\frac{t^{-3/2}(t + \\beta)}{4\\alpha\\beta^{1/2}\\Phi(-\\gamma)}\\,\\phi(|a(t)| + \\gamma),

i.e. ``a(T)`` has density ``phi(|x| + gamma) / (2 Phi(-gamma))``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np
from scipy import special as _special

from .errors import DomainError, FitError, OptimizationError
from .numerics import OptimizerSettings, RngStream, minimize, numeric_hessian
from .observations import as_arrays

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_pos(name, v):
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"{name} must be > 0, got {v}")


@dataclass(frozen=True)
class BsParams:
    alpha: float
    beta: float

    def __post_init__(self):
        _check_pos("alpha", self.alpha)
        _check_pos("beta", self.beta)


@dataclass(frozen=True)
class LnParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")
        _check_pos("sigma", self.sigma)


@dataclass(frozen=True)
class BbsoParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        _check_pos("alpha", self.alpha)
        _check_pos("beta", self.beta)
        if not math.isfinite(self.gamma):
            raise DomainError("gamma must be finite")


@dataclass(frozen=True)
class MxbsParams:
    """``p BS(alpha1, beta1) + (1 - p) BS(alpha2, beta2)``."""

    alpha1: float
    beta1: float
    alpha2: float
    beta2: float
    p: float

    def __post_init__(self):
        for name in ("alpha1", "beta1", "alpha2", "beta2"):
            _check_pos(name, getattr(self, name))
        if not 0.0 <= self.p <= 1.0:
            raise DomainError("p must lie in [0, 1]")

    @property
    def components(self):
        return BsParams(self.alpha1, self.beta1), BsParams(self.alpha2, self.beta2)


ModelParams = Union[BsParams, LnParams, BbsoParams, MxbsParams]

MODEL_TAGS = ("bs", "ln", "bbso", "mxbs")
PARAM_COUNT = {"bs": 2, "ln": 2, "bbso": 3, "mxbs": 5, "bbs": 3}


def _times(t):
    tt = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(tt)) or np.any(tt <= 0):
        raise DomainError("times must be finite and > 0")
    return tt


def _ret(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _a(t, alpha, beta):
    r = np.sqrt(t / beta)
    return (r - 1.0 / r) / alpha


def _log_jacobian(t, alpha, beta):
    # log a'(t) = log(t + beta) - 1.5 log t - log(2 alpha sqrt(beta))
    return np.log(t + beta) - 1.5 * np.log(t) - math.log(2.0 * alpha * math.sqrt(beta))


def _logsumexp2(x, y):
    m = np.maximum(x, y)
    m = np.where(np.isfinite(m), m, 0.0)
    return m + np.log(np.exp(x - m) + np.exp(y - m))


# ---------------------------------------------------------------------------
# log-density and log-survival per model
# ---------------------------------------------------------------------------


def _logpdf(t, p):
    if isinstance(p, BsParams):
        a = _a(t, p.alpha, p.beta)
        return -0.5 * a * a - _LOG_SQRT_2PI + _log_jacobian(t, p.alpha, p.beta)
    if isinstance(p, LnParams):
        z = (np.log(t) - p.mu) / p.sigma
        return -0.5 * z * z - _LOG_SQRT_2PI - math.log(p.sigma) - np.log(t)
    if isinstance(p, BbsoParams):
        y = np.abs(_a(t, p.alpha, p.beta)) + p.gamma
        return (-0.5 * y * y - _LOG_SQRT_2PI - math.log(2.0) - _special.log_ndtr(-p.gamma)
                + _log_jacobian(t, p.alpha, p.beta))
    if isinstance(p, MxbsParams):
        c1, c2 = p.components
        with np.errstate(divide="ignore"):
            l1 = _logpdf(t, c1) + (math.log(p.p) if p.p > 0 else -np.inf)
            l2 = _logpdf(t, c2) + (math.log1p(-p.p) if p.p < 1 else -np.inf)
        return _logsumexp2(l1, l2)
    raise DomainError(f"unknown parameter record {type(p).__name__}")


def _logsf(t, p):
    if isinstance(p, BsParams):
        return _special.log_ndtr(-_a(t, p.alpha, p.beta))
    if isinstance(p, LnParams):
        return _special.log_ndtr(-(np.log(t) - p.mu) / p.sigma)
    if isinstance(p, BbsoParams):
        a = _a(t, p.alpha, p.beta)
        lg = _special.log_ndtr(-p.gamma)
        right = _special.log_ndtr(-a - p.gamma) - math.log(2.0) - lg
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.log1p(-np.exp(_special.log_ndtr(a - p.gamma) - math.log(2.0) - lg))
        return np.where(a > 0, right, left)
    if isinstance(p, MxbsParams):
        c1, c2 = p.components
        with np.errstate(divide="ignore"):
            l1 = _logsf(t, c1) + (math.log(p.p) if p.p > 0 else -np.inf)
            l2 = _logsf(t, c2) + (math.log1p(-p.p) if p.p < 1 else -np.inf)
        return _logsumexp2(l1, l2)
    raise DomainError(f"unknown parameter record {type(p).__name__}")


def _cdf(t, p):
    if isinstance(p, BsParams):
        return _special.ndtr(_a(t, p.alpha, p.beta))
    if isinstance(p, LnParams):
        return _special.ndtr((np.log(t) - p.mu) / p.sigma)
    if isinstance(p, BbsoParams):
        a = _a(t, p.alpha, p.beta)
        den = 2.0 * _special.ndtr(-p.gamma)
        return np.where(a <= 0, _special.ndtr(a - p.gamma) / den,
                        1.0 - _special.ndtr(-a - p.gamma) / den)
    if isinstance(p, MxbsParams):
        c1, c2 = p.components
        return p.p * _cdf(t, c1) + (1.0 - p.p) * _cdf(t, c2)
    raise DomainError(f"unknown parameter record {type(p).__name__}")


def model_logpdf(t, params: ModelParams):
    return _ret(_logpdf(_times(t), params), t)


def model_pdf(t, params: ModelParams):
    """Density of any competitor model at ``t``."""
    return _ret(np.exp(_logpdf(_times(t), params)), t)


def model_cdf(t, params: ModelParams):
    return _ret(_cdf(_times(t), params), t)


def model_sf(t, params: ModelParams):
    """Survival function, evaluated through its logarithm for tail accuracy."""
    return _ret(np.exp(_logsf(_times(t), params)), t)


def model_logsf(t, params: ModelParams):
    return _ret(_logsf(_times(t), params), t)


def _loglik_arrays(t, ev, params):
    total = 0.0
    if np.any(ev):
        total += float(np.sum(_logpdf(t[ev], params)))
    if np.any(~ev):
        total += float(np.sum(_logsf(t[~ev], params)))
    return total


def model_loglik(data, params: ModelParams) -> float:
    """Log-likelihood: log-densities of events plus log-survivals of censored times.

    Raises
    ------
    DomainError
        If the value is not finite (density or survival underflow).
    """
    t, ev = as_arrays(data)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = _loglik_arrays(t, ev, params)
    if not math.isfinite(val):
        raise DomainError("log-likelihood is not finite at these parameters")
    return val


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _bs_from_normal(z, alpha, beta):
    az = 0.5 * alpha * z
    return beta * (az + np.sqrt(az * az + 1.0)) ** 2


def model_sample(n: int, params: ModelParams, rng: RngStream) -> np.ndarray:
    """``n`` draws from the model described by ``params``."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    if isinstance(params, BsParams):
        return _bs_from_normal(rng.normal(n), params.alpha, params.beta)
    if isinstance(params, LnParams):
        return np.exp(params.mu + params.sigma * rng.normal(n))
    if isinstance(params, BbsoParams):
        # |X| by inverting its survival Phi(-y - gamma) / Phi(-gamma), then a random sign
        g = params.gamma
        v = rng.uniform(n)
        y = -g - _special.ndtri(v * _special.ndtr(-g))
        y = np.maximum(y, 0.0)
        sign = np.where(rng.uniform(n) < 0.5, -1.0, 1.0)
        return _bs_from_normal(sign * y, params.alpha, params.beta)
    if isinstance(params, MxbsParams):
        pick = rng.uniform(n) < params.p
        z = rng.normal(n)
        alpha = np.where(pick, params.alpha1, params.alpha2)
        beta = np.where(pick, params.beta1, params.beta2)
        return _bs_from_normal(z, alpha, beta)
    raise DomainError(f"unknown parameter record {type(params).__name__}")


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


@dataclass
class ModelFit:
    """Maximum-likelihood fit of one competitor model.

    ``se`` maps parameter names to standard errors from the inverse observed
    information; a value of ``nan`` means the information was not invertible
    or the parameter was held fixed.
    """

    model: str
    params: ModelParams
    se: Dict[str, float]
    loglik: float
    k: int
    n: int
    converged: bool
    iterations: int
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.k

    @property
    def bic(self) -> float:
        return -2.0 * self.loglik + self.k * math.log(self.n)


def _robust_start(t):
    cv = float(np.std(t, ddof=1) / np.mean(t)) if t.size > 1 else 0.5
    return float(np.clip(cv, 0.05, 4.0)), float(np.median(t))


def _starts(model, t, fixed_p):
    alpha0, beta0 = _robust_start(t)
    if model == "bs":
        return [np.log([alpha0, beta0])]
    if model == "ln":
        lt = np.log(t)
        return [np.array([lt.mean(), math.log(max(lt.std(), 1e-3))])]
    if model == "bbso":
        return [np.array([math.log(alpha0 * s), math.log(beta0), g])
                for g, s in [(-3.0, 0.4), (-2.0, 0.5), (-1.0, 0.7), (0.0, 1.0), (1.0, 1.5)]]
    if model == "mxbs":
        ts = np.sort(t)
        lo, hi = ts[: ts.size // 2], ts[ts.size // 2:]
        a1, b1 = _robust_start(lo)
        a2, b2 = _robust_start(hi)
        a1, a2 = max(a1 * 0.8, 0.05), max(a2 * 0.8, 0.05)
        b2 = max(b2, b1 * 1.01)
        core = [math.log(a1), math.log(b1), math.log(a2), math.log(b2 - b1)]
        if fixed_p is not None:
            return [np.array(core)]
        return [np.array(core + [math.log(p0 / (1 - p0))]) for p0 in (0.3, 0.5, 0.7)]
    raise DomainError(f"unknown model tag {model!r}")


def _unpack(model, x, fixed_p=None) -> ModelParams:
    if model == "bs":
        return BsParams(math.exp(x[0]), math.exp(x[1]))
    if model == "ln":
        return LnParams(float(x[0]), math.exp(x[1]))
    if model == "bbso":
        return BbsoParams(math.exp(x[0]), math.exp(x[1]), float(x[2]))
    if model == "mxbs":
        b1 = math.exp(x[1])
        p = fixed_p if fixed_p is not None else float(_special.expit(x[4]))
        return MxbsParams(math.exp(x[0]), b1, math.exp(x[2]), b1 + math.exp(x[3]), p)
    raise DomainError(f"unknown model tag {model!r}")


def _natural(model, params):
    if model == "bs":
        return ["alpha", "beta"], np.array([params.alpha, params.beta])
    if model == "ln":
        return ["mu", "sigma"], np.array([params.mu, params.sigma])
    if model == "bbso":
        return ["alpha", "beta", "gamma"], np.array([params.alpha, params.beta, params.gamma])
    names = ["alpha1", "beta1", "alpha2", "beta2", "p"]
    return names, np.array([getattr(params, k) for k in names])


def _from_natural(model, v, fixed_p):
    if model == "bs":
        return BsParams(*v)
    if model == "ln":
        return LnParams(*v)
    if model == "bbso":
        return BbsoParams(*v)
    if fixed_p is not None:
        return MxbsParams(*v, fixed_p)
    return MxbsParams(*v)


def _standard_errors(model, params, t, ev, fixed_p):
    names, v = _natural(model, params)
    if model == "mxbs" and fixed_p is not None:
        names, v = names[:4], v[:4]

    def nll(w):
        try:
            q = _from_natural(model, w, fixed_p)
        except DomainError:
            return math.inf
        with np.errstate(all="ignore"):
            return -_loglik_arrays(t, ev, q)

    # relative steps on each coordinate; gamma and mu may sit near zero
    scale = np.where(np.abs(v) > 0, np.abs(v), 1.0)
    H = numeric_hessian(lambda u: nll(u * scale), v / scale, rel_step=1e-4)
    H = H / np.outer(scale, scale)
    se = {k: float("nan") for k in names}
    if model == "mxbs" and fixed_p is not None:
        se["p"] = float("nan")
    if not np.all(np.isfinite(H)):
        return se
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        return se
    d = np.diag(cov)
    for k, dv in zip(names, d):
        se[k] = float(math.sqrt(dv)) if dv > 0 else float("nan")
    return se


def model_fit(data, model: str, fixed_p: Optional[float] = None,
              settings: Optional[OptimizerSettings] = None) -> ModelFit:
    """Maximum-likelihood fit of a competitor model.

    Parameters
    ----------
    data : observations or array of times
    model : {'bs', 'ln', 'bbso', 'mxbs'}
    fixed_p : float, optional
        Hold the MXBS mixing weight at this value (then four free parameters).

    Positive parameters are optimised on the log scale, the MXBS weight on
    the logit scale, and the MXBS scales as ``beta1`` and ``beta2 - beta1 > 0``
    so the components never swap labels.  Several starts are tried for BBSO
    and MXBS and the best optimum is kept.

    Raises
    ------
    FitError
        If every start fails.  A best optimum that stopped without meeting
        the tolerances is returned with ``converged=False`` and a warning,
        since likelihoods that keep rising along a ridge are still useful
        for model comparison.
    """
    model = model.lower()
    if model not in MODEL_TAGS:
        raise DomainError(f"unknown model tag {model!r}")
    if fixed_p is not None and model != "mxbs":
        raise DomainError("fixed_p applies only to the mxbs model")
    if fixed_p is not None and not 0.0 < fixed_p < 1.0:
        raise DomainError("fixed_p must lie in (0, 1)")
    t, ev = as_arrays(data)
    k = PARAM_COUNT[model] - (1 if fixed_p is not None else 0)
    if t.size < max(5, k + 1):
        raise FitError(f"need at least {max(5, k + 1)} observations, got {t.size}")
    scale = float(np.median(t))

    def nll(x):
        try:
            q = _unpack(model, x, fixed_p)
        except (DomainError, OverflowError):
            return math.inf
        with np.errstate(all="ignore"):
            val = -_loglik_arrays(t, ev, q) / t.size
        return val if math.isfinite(val) else math.inf

    opts = settings or OptimizerSettings(max_iterations=1000, gradient_tolerance=1e-7)
    best, messages = None, []
    for x0 in _starts(model, t, fixed_p):
        try:
            res = minimize(nll, x0, settings=opts)
        except OptimizationError as exc:
            messages.append(str(exc))
            continue
        messages.append(res.message)
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise FitError(f"{model} fit failed at every start", {"messages": messages, "scale": scale})
    params = _unpack(model, best.x, fixed_p)
    loglik = -best.fun * t.size
    if not best.converged:
        warnings.warn(f"{model} fit stopped without converging: {best.message}")
    se = _standard_errors(model, params, t, ev, fixed_p)
    return ModelFit(model, params, se, loglik, k, int(t.size), bool(best.converged),
                    int(best.iterations), {"messages": messages})
