"""Delta-method confidence intervals for the survival function, mean and variance.

``delta`` is held at its fitted value throughout.  The pointwise standard
error of the estimated survival is

    se(t)^2 = J(t) Sigma J(t)^T,   J(t) = -g(a(t)) [da/dalpha, da/dbeta],

with ``Sigma`` the inverse observed information of the whole sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bbs import BbsParams, asn_pdf, bbs_moments, bbs_quantile, bbs_sf
from .errors import CiUnavailableError, DomainError, MomentError, QuadratureError
from .estimation import FitResult, observed_information
from .numerics import QuadratureSettings, integrate_positive_axis, std_normal_ppf


@dataclass
class CiResult:
    """One confidence interval.

    ``target`` is ``'survival'``, ``'mean'`` or ``'variance'``; ``t`` is set
    only for survival.  ``confidence`` is ``1 - rho`` except for the variance,
    where the construction guarantees ``1 - 2 rho``.
    """

    target: str
    t: Optional[float]
    estimate: float
    lower: float
    upper: float
    confidence: float
    rho: float


def _check_rho(rho):
    if not 0.0 < rho < 1.0:
        raise DomainError("rho must lie in (0, 1)")
    return float(std_normal_ppf(1.0 - 0.5 * rho))


def _covariance(fit: FitResult, data):
    if not fit.converged:
        raise CiUnavailableError("fit did not converge")
    if data is None:
        cov = fit.covariance
    else:
        info = observed_information(data, fit.params)
        try:
            np.linalg.cholesky(info)
            cov = np.linalg.inv(info)
        except np.linalg.LinAlgError:
            cov = None
    if cov is None or not np.all(np.isfinite(cov)):
        raise CiUnavailableError("observed information is singular or not positive definite")
    return cov


def survival_jacobian(t, p: BbsParams):
    """``[dS/dalpha, dS/dbeta]`` at each ``t`` (shape ``(..., 2)``)."""
    tt = np.asarray(t, dtype=float)
    if np.any(~(tt > 0)):
        raise DomainError("times must be > 0")
    r = np.sqrt(tt / p.beta)
    a = (r - 1.0 / r) / p.alpha
    g = asn_pdf(a, p.asn)
    return np.stack([g * a / p.alpha, g * (r + 1.0 / r) / (2.0 * p.alpha * p.beta)], axis=-1)


def survival_se(t, p: BbsParams, cov: np.ndarray):
    J = survival_jacobian(t, p)
    var = np.einsum("...i,ij,...j->...", J, cov, J)
    return np.sqrt(np.maximum(var, 0.0))


def ci_survival(t: float, fit: FitResult, data=None, rho: float = 0.05) -> CiResult:
    """Pointwise interval ``S(t) -/+ z se(t)`` clipped to ``[0, 1]``, level ``1 - rho``.

    ``data`` recomputes the observed information; when omitted the
    covariance stored on ``fit`` is used.
    """
    z = _check_rho(rho)
    if not (math.isfinite(t) and t > 0):
        raise DomainError("t must be > 0")
    cov = _covariance(fit, data)
    s = float(bbs_sf(t, fit.params))
    half = z * float(survival_se(t, fit.params, cov))
    return CiResult("survival", float(t), s, max(s - half, 0.0), min(s + half, 1.0), 1.0 - rho, rho)


def _integrate(f, p, settings):
    s = settings or QuadratureSettings(abs_tol=1e-10, rel_tol=1e-9)
    try:
        return float(integrate_positive_axis(f, s, quantile=lambda u: bbs_quantile(u, p)))
    except (QuadratureError, DomainError) as exc:
        raise CiUnavailableError(f"quadrature failed: {exc}") from exc


def ci_mean(fit: FitResult, data=None, rho: float = 0.05,
            settings: Optional[QuadratureSettings] = None) -> CiResult:
    """``E[T] -/+ z * integral of se(t)``, level ``1 - rho``; lower bound floored at 0."""
    z = _check_rho(rho)
    cov = _covariance(fit, data)
    p = fit.params
    try:
        mean = bbs_moments(p).mean
    except MomentError as exc:
        raise CiUnavailableError(str(exc)) from exc
    spread = _integrate(lambda t: survival_se(t, p, cov), p, settings)
    return CiResult("mean", None, mean, max(mean - z * spread, 0.0), mean + z * spread, 1.0 - rho, rho)


def ci_variance(fit: FitResult, data=None, rho: float = 0.025,
                settings: Optional[QuadratureSettings] = None) -> CiResult:
    """Interval for ``Var[T]`` from the survival band, level at least ``1 - 2 rho``.

    With ``L-`` and ``L+`` the lower (floored at 0) and upper band around
    ``S``, the bounds are ``2 int t L- - (int L+)^2`` and
    ``2 int t L+ - (int L-)^2``; these reduce to ``Var[T]`` as ``z -> 0``
    because ``E[T^2] = 2 int t S`` and ``E[T] = int S``.
    """
    z = _check_rho(rho)
    cov = _covariance(fit, data)
    p = fit.params

    def band(t, sign):
        s = bbs_sf(t, p) + sign * z * survival_se(t, p, cov)
        return np.maximum(s, 0.0)

    int_t_lo = _integrate(lambda t: t * band(t, -1.0), p, settings)
    int_t_hi = _integrate(lambda t: t * band(t, 1.0), p, settings)
    int_lo = _integrate(lambda t: band(t, -1.0), p, settings)
    int_hi = _integrate(lambda t: band(t, 1.0), p, settings)
    lower = max(2.0 * int_t_lo - int_hi ** 2, 0.0)
    upper = 2.0 * int_t_hi - int_lo ** 2
    try:
        est = bbs_moments(p).variance
    except MomentError as exc:
        raise CiUnavailableError(str(exc)) from exc
    return CiResult("variance", None, est, lower, upper, 1.0 - 2.0 * rho, rho)
