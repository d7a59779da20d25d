r"""The alpha-skew-normal law and the bimodal Birnbaum-Saunders law built on it.

If ``X ~ ASN(delta)`` with density

.. math:: g(x) = \frac{(1 - \delta x)^2 + 1}{2 + \delta^2}\,\phi(x),

then ``T = a^{-1}(X)`` follows ``BBS(alpha, beta, delta)``, where

.. math:: a(t) = \frac{1}{\alpha}\Bigl(\sqrt{t/\beta} - \sqrt{\beta/t}\Bigr).

``delta = 0`` recovers the classical Birnbaum-Saunders law.  All
functions taking ``t`` or ``x`` are vectorised over that argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import special as _special

from .errors import DomainError, MomentError, OverflowHazardError, QuadratureError
from .numerics import (
    QuadratureSettings,
    RngStream,
    find_root,
    find_roots_monotone,
    integrate_positive_axis,
    integrate_real_line,
)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_X_BRACKET = 60.0


@dataclass(frozen=True)
class AsnParams:
    """Parameter of the alpha-skew-normal law."""

    delta: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.delta):
            raise DomainError("delta must be finite")


@dataclass(frozen=True)
class BbsParams:
    """``(alpha, beta, delta)`` of the bimodal Birnbaum-Saunders law."""

    alpha: float
    beta: float
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f"beta must be > 0, got {self.beta}")
        if not math.isfinite(self.delta):
            raise DomainError("delta must be finite")

    @property
    def asn(self) -> AsnParams:
        return AsnParams(self.delta)


@dataclass
class MomentSet:
    """Raw moments of order 1-4 and the variance, with the omega values used.

    ``omega_table[(r, k)]`` is ``E[X^r (alpha^2 X^2 + 4)^(k/2)]`` for
    ``X ~ ASN(delta)``.
    """

    mean: float
    raw2: float
    raw3: float
    raw4: float
    variance: float
    omega_table: Dict[Tuple[int, int], float] = field(default_factory=dict)


@dataclass
class ModeStructure:
    """Critical points of a BBS density in increasing order."""

    critical_points: np.ndarray
    classification: Tuple[str, ...]

    @property
    def maxima(self) -> np.ndarray:
        return self.critical_points[[c == "maximum" for c in self.classification]]

    @property
    def minima(self) -> np.ndarray:
        return self.critical_points[[c == "minimum" for c in self.classification]]

    @property
    def is_bimodal(self) -> bool:
        return self.maxima.size == 2


# ---------------------------------------------------------------------------
# the transform a(t)
# ---------------------------------------------------------------------------


def _positive_times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise DomainError("times must be finite and > 0")
    return arr


def _ret(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def a_of_t(t, p: BbsParams):
    """``a(t) = (sqrt(t/beta) - sqrt(beta/t)) / alpha``."""
    tt = _positive_times(t)
    r = np.sqrt(tt / p.beta)
    return _ret((r - 1.0 / r) / p.alpha, t)


def a_derivatives(t, p: BbsParams, order: int):
    """Derivative of order 1, 2 or 3 of ``a`` with respect to ``t``."""
    tt = _positive_times(t)
    r = np.sqrt(tt / p.beta)
    ir = 1.0 / r
    if order == 1:
        out = (r + ir) / (2.0 * p.alpha * tt)
    elif order == 2:
        out = -(r + 3.0 * ir) / (4.0 * p.alpha * tt ** 2)
    elif order == 3:
        out = 3.0 * (r + 5.0 * ir) / (8.0 * p.alpha * tt ** 3)
    else:
        raise DomainError("order must be 1, 2 or 3")
    return _ret(out, t)


def a_inverse(x, p: BbsParams):
    """Inverse of ``a``: ``(beta/4) (alpha x + sqrt((alpha x)^2 + 4))^2``.

    For negative ``x`` the bracket is rewritten as ``4 / (sqrt(...) - alpha x)``
    so no cancellation occurs in the far left tail.
    """
    xx = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xx)):
        raise DomainError("a_inverse needs finite input")
    ax = p.alpha * xx
    root = np.hypot(ax, 2.0)
    with np.errstate(divide="ignore"):
        bracket = np.where(ax >= 0, ax + root, 4.0 / (root - ax))
    return _ret(0.25 * p.beta * bracket ** 2, x)


def _a_parts(t, p):
    """a, a', a'' and a''' in one pass (internal, no validation)."""
    r = np.sqrt(t / p.beta)
    ir = 1.0 / r
    a = (r - ir) / p.alpha
    a1 = (r + ir) / (2.0 * p.alpha * t)
    a2 = -(r + 3.0 * ir) / (4.0 * p.alpha * t * t)
    a3 = 3.0 * (r + 5.0 * ir) / (8.0 * p.alpha * t ** 3)
    return a, a1, a2, a3


# ---------------------------------------------------------------------------
# alpha-skew-normal
# ---------------------------------------------------------------------------


def _mills(x):
    """``(1 - Phi(x)) / phi(x)``, finite for every real ``x``."""
    return _SQRT_HALF_PI * _special.erfcx(x / math.sqrt(2.0))


def _r(x, d):
    return (1.0 - d * x) ** 2 + 1.0


def asn_logpdf(x, q: AsnParams):
    xx = np.asarray(x, dtype=float)
    d = q.delta
    out = np.log(_r(xx, d)) - math.log(2.0 + d * d) - 0.5 * xx * xx - _LOG_SQRT_2PI
    return _ret(out, x)


def asn_pdf(x, q: AsnParams):
    """ASN density ``((1 - delta x)^2 + 1) phi(x) / (2 + delta^2)``."""
    return _ret(np.exp(asn_logpdf(x, q)), x)


def _asn_c(x, d):
    return d * (2.0 - d * x) / (2.0 + d * d)


def _tail_log(x, d, upper):
    """log of the ASN tail mass beyond ``x`` (upper) or below it (lower).

    ``phi(x) (mills(+-x) -+ c(x))`` is accurate in its own tail, and the
    complement ``log1p(-exp(...))`` takes over on the other side, where the
    Mills ratio would overflow.
    """
    xx = np.asarray(x, dtype=float)
    s = 1.0 if upper else -1.0
    own = s * xx >= 0
    out = np.empty(np.shape(xx))
    xo = xx[own]
    out[own] = -0.5 * xo * xo - _LOG_SQRT_2PI + np.log(_mills(s * xo) - s * _asn_c(xo, d))
    xc = xx[~own]
    other = -0.5 * xc * xc - _LOG_SQRT_2PI + np.log(_mills(-s * xc) + s * _asn_c(xc, d))
    out[~own] = np.log1p(-np.exp(other))
    return out


def asn_logcdf(x, q: AsnParams):
    return _ret(_tail_log(x, q.delta, upper=False), x)


def asn_logsf(x, q: AsnParams):
    return _ret(_tail_log(x, q.delta, upper=True), x)


def asn_cdf(x, q: AsnParams):
    """``G(x) = Phi(x) + delta (2 - delta x) phi(x) / (2 + delta^2)``."""
    return _ret(np.exp(asn_logcdf(x, q)), x)


def asn_sf(x, q: AsnParams):
    return _ret(np.exp(asn_logsf(x, q)), x)


def asn_log_derivative(x, q: AsnParams):
    """``g'(x) / g(x) = -2 delta (1 - delta x) / r(x) - x``."""
    xx = np.asarray(x, dtype=float)
    d = q.delta
    return _ret(-2.0 * d * (1.0 - d * xx) / _r(xx, d) - xx, x)


def asn_pdf_derivatives(x, q: AsnParams):
    """First and second derivatives ``(g'(x), g''(x))`` of the ASN density."""
    xx = np.asarray(x, dtype=float)
    d = q.delta
    phi = np.exp(-0.5 * xx * xx - _LOG_SQRT_2PI)
    c = 2.0 + d * d
    g1 = phi / c * (-d * d * xx ** 3 + 2 * d * xx ** 2 - 2 * (1 - d * d) * xx - 2 * d)
    g2 = -xx * g1 + phi * (-3 * d * d * xx ** 2 + 4 * d * xx - 2 * (1 - d * d)) / c
    return _ret(g1, x), _ret(g2, x)


def asn_critical_points(q: AsnParams) -> np.ndarray:
    """Real zeros of ``g'`` in increasing order (one or three of them)."""
    d = q.delta
    roots = np.roots([-d * d, 2 * d, -2 * (1 - d * d), -2 * d]) if d != 0 else np.array([0.0])
    real = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
    return real


def asn_quantile(u, q: AsnParams):
    """Inverse of :func:`asn_cdf` by safeguarded Newton iteration."""
    uu = np.asarray(u, dtype=float)
    if np.any(~(uu > 0) | ~(uu < 1)):
        raise DomainError("u must lie in (0, 1)")
    flat = np.atleast_1d(uu).ravel()
    out = np.empty_like(flat)
    lower = flat <= 0.5
    pdf = lambda x: asn_pdf(x, q)  # noqa: E731
    if np.any(lower):
        out[lower] = find_roots_monotone(
            lambda x: asn_cdf(x, q), pdf, flat[lower], -_X_BRACKET, _X_BRACKET, tol=1e-15)
    if np.any(~lower):
        # solve -sf(x) = -(1 - u) to keep relative precision in the upper tail
        out[~lower] = find_roots_monotone(
            lambda x: -asn_sf(x, q), pdf, -(1.0 - flat[~lower]), -_X_BRACKET, _X_BRACKET,
            tol=1e-15)
    return _ret(out.reshape(np.shape(uu)), u)


# ---------------------------------------------------------------------------
# BBS density, distribution, hazard
# ---------------------------------------------------------------------------


def bbs_logpdf(t, p: BbsParams):
    tt = _positive_times(t)
    a = a_of_t(tt, p)
    d = p.delta
    out = (np.log(_r(a, d)) - math.log(2.0 + d * d) - 0.5 * a * a - _LOG_SQRT_2PI
           + np.log(tt + p.beta) - 1.5 * np.log(tt) - math.log(2.0 * p.alpha * math.sqrt(p.beta)))
    return _ret(out, t)


def bbs_pdf(t, p: BbsParams):
    """BBS density ``g(a(t)) a'(t)``."""
    return _ret(np.exp(bbs_logpdf(t, p)), t)


def bbs_cdf(t, p: BbsParams):
    """``F(t) = G(a(t))``."""
    return _ret(asn_cdf(a_of_t(t, p), p.asn), t)


def bbs_sf(t, p: BbsParams):
    """``S(t) = 1 - G(a(t))``, computed without cancellation."""
    return _ret(asn_sf(a_of_t(t, p), p.asn), t)


def bbs_logsf(t, p: BbsParams):
    return _ret(asn_logsf(a_of_t(t, p), p.asn), t)


def bbs_logcdf(t, p: BbsParams):
    return _ret(asn_logcdf(a_of_t(t, p), p.asn), t)


def bbs_hr(t, p: BbsParams):
    """Hazard rate ``f(t) / S(t)``.

    Raises
    ------
    OverflowHazardError
        Where ``S(t) < 1e-300``.
    """
    logsf = np.asarray(bbs_logsf(t, p))
    if np.any(logsf < math.log(1e-300)):
        raise OverflowHazardError("survival function below 1e-300; hazard not representable")
    return _ret(np.exp(np.asarray(bbs_logpdf(t, p)) - logsf), t)


def bbs_quantile(u, p: BbsParams):
    """Quantile function: ``a^{-1}(G^{-1}(u))``."""
    return _ret(a_inverse(asn_quantile(u, p.asn), p), u)


def bbs_sample(n: int, p: BbsParams, rng: RngStream):
    """``n`` draws: ASN variates by CDF inversion, mapped through ``a^{-1}``."""
    if int(n) < 1:
        raise DomainError("n must be >= 1")
    u = rng.uniform(int(n))
    return a_inverse(asn_quantile(u, p.asn), p)


def bbs_pdf_derivatives(t, p: BbsParams):
    """``(f'(t), f''(t))`` from the chain rule on ``g(a(t)) a'(t)``."""
    tt = _positive_times(t)
    a, a1, a2, a3 = _a_parts(tt, p)
    g = asn_pdf(a, p.asn)
    g1, g2 = asn_pdf_derivatives(a, p.asn)
    f1 = g1 * a1 ** 2 + g * a2
    f2 = g2 * a1 ** 3 + 3 * g1 * a1 * a2 + g * a3
    return _ret(f1, t), _ret(f2, t)


def _log_density_slopes(t, p):
    """``f'/f`` and ``f''/f``; finite where the density itself underflows."""
    a, a1, a2, a3 = _a_parts(t, p)
    d = p.delta
    r = _r(a, d)
    lg1 = -2.0 * d * (1.0 - d * a) / r - a
    lg2 = -a * lg1 + (-3 * d * d * a * a + 4 * d * a - 2 * (1 - d * d)) / r
    return lg1 * a1 + a2 / a1, lg2 * a1 * a1 + 3 * lg1 * a2 + a3 / a1


def decreasing_threshold(p: BbsParams) -> float:
    """``t0 = a^{-1}(1/delta)``, where the ASN weight ``(1 - delta a)^2 + 1`` turns.

    The weight decreases in ``t`` below ``t0`` for either sign of ``delta``,
    and the BS factor decreases above ``beta``.  For ``delta > 0`` (so that
    ``t0 > beta``) the density is therefore decreasing on ``(beta, t0)``.
    Undefined for ``delta = 0``.
    """
    if p.delta == 0:
        raise DomainError("threshold undefined for delta = 0")
    k = p.alpha / p.delta
    return p.beta * (k + math.sqrt(k * k + 4.0)) ** 2 / 4.0


# ---------------------------------------------------------------------------
# moments and entropy
# ---------------------------------------------------------------------------


def omega(r: int, k: int, p: BbsParams, settings: Optional[QuadratureSettings] = None) -> float:
    """``E[X^r (alpha^2 X^2 + 4)^(k/2)]`` for ``X ~ ASN(delta)`` by quadrature."""
    q = p.asn
    a2 = p.alpha ** 2

    def integrand(x):
        return x ** r * (a2 * x * x + 4.0) ** (0.5 * k) * asn_pdf(x, q)

    try:
        return float(integrate_real_line(integrand, settings or QuadratureSettings(1e-13, 1e-12)))
    except QuadratureError as exc:
        raise MomentError(f"omega({r},{k}) quadrature failed: {exc}") from exc


def bbs_moments(p: BbsParams, settings: Optional[QuadratureSettings] = None) -> MomentSet:
    r"""Raw moments of order 1-4 through the omega integrals.

    With ``R = sqrt(alpha^2 X^2 + 4)`` the stochastic representation is
    ``T = (beta/4) (alpha X + R)^2``, hence

    .. math:: E[T^n] = (\beta/4)^n \sum_{j=0}^{2n} \binom{2n}{j} \alpha^j \omega_{j, 2n-j}.

    Terms with ``2n - j`` even are polynomial ASN moments and are not
    integrated numerically; ``omega`` handles them all the same, so the
    table holds every pair actually used.
    """
    a, b = p.alpha, p.beta
    table: Dict[Tuple[int, int], float] = {}
    raw = []
    for n in range(1, 5):
        total = 0.0
        for j in range(2 * n + 1):
            key = (j, 2 * n - j)
            if key not in table:
                table[key] = _omega_fast(j, 2 * n - j, p, settings)
            total += math.comb(2 * n, j) * a ** j * table[key]
        raw.append((0.25 * b) ** n * total)
    mean, raw2, raw3, raw4 = raw
    return MomentSet(mean, raw2, raw3, raw4, raw2 - mean * mean, table)


def asn_raw_moment(n: int, q: AsnParams) -> float:
    """``E[X^n]`` for ``X ~ ASN(delta)`` in closed form.

    ``(2 + delta^2) E[X^n] = 2 m_n - 2 delta m_{n+1} + delta^2 m_{n+2}``
    with ``m_k`` the standard normal moments.
    """
    if n < 0:
        raise DomainError("n must be >= 0")

    def m(k):
        return 0.0 if k % 2 else float(_special.factorial2(k - 1, exact=True)) if k else 1.0

    d = q.delta
    return (2.0 * m(n) - 2.0 * d * m(n + 1) + d * d * m(n + 2)) / (2.0 + d * d)


def _omega_fast(r, k, p, settings):
    if k % 2:
        return omega(r, k, p, settings)
    # even k: expand (alpha^2 x^2 + 4)^(k/2) into ASN moments
    h = k // 2
    return sum(math.comb(h, i) * p.alpha ** (2 * i) * 4.0 ** (h - i) * asn_raw_moment(r + 2 * i, p.asn)
               for i in range(h + 1))


def bbs_entropy(p: BbsParams, settings: Optional[QuadratureSettings] = None) -> float:
    """Shannon entropy as a closed-form constant plus one expectation.

    ``H = C + E[log{T^{3/2} / (T + beta) / ((1 - delta a(T))^2 + 1)}]`` with
    ``C = log(2 + delta^2) + log(2 alpha sqrt(beta)) + log(sqrt(2 pi))
    + (1 + 2 delta^2 / (2 + delta^2)) / 2``.  The expectation is taken over
    ``X = a(T) ~ ASN(delta)``.
    """
    a, b, d = p.alpha, p.beta, p.delta
    c = 2.0 + d * d
    const = math.log(c) + math.log(2 * a * math.sqrt(b)) + _LOG_SQRT_2PI + 0.5 * (1 + 2 * d * d / c)
    q = p.asn

    def integrand(x):
        t = a_inverse(x, p)
        return (1.5 * np.log(t) - np.log(t + b) - np.log(_r(x, d))) * asn_pdf(x, q)

    try:
        expect = integrate_real_line(integrand, settings or QuadratureSettings(1e-12, 1e-12))
    except QuadratureError as exc:
        raise MomentError(f"entropy quadrature failed: {exc}") from exc
    return const + float(expect)


# ---------------------------------------------------------------------------
# modes and hazard shape
# ---------------------------------------------------------------------------


def bbs_modes(p: BbsParams, grid_size: int = 2048) -> ModeStructure:
    """All critical points of the density and whether each is a max or min.

    Sign changes of ``f'/f`` are searched on a log-spaced grid between the
    1e-6 and 1 - 1e-6 quantiles and polished with :func:`find_root`.
    """
    lo, hi = bbs_quantile(np.array([1e-6, 1 - 1e-6]), p)
    # the density is monotone outside the central quantiles, so widen lightly
    grid = np.geomspace(lo * 0.5, hi * 2.0, grid_size)
    slope, _ = _log_density_slopes(grid, p)

    def fprime(t):
        return float(_log_density_slopes(np.array([t]), p)[0][0])

    points = []
    for i in np.flatnonzero(np.sign(slope[:-1]) * np.sign(slope[1:]) <= 0):
        if slope[i] == 0 and points and points[-1] == grid[i]:
            continue
        if slope[i] == 0:
            points.append(float(grid[i]))
        elif slope[i + 1] != 0:
            points.append(find_root(fprime, float(grid[i]), float(grid[i + 1]), tol=1e-14 * grid[i]))
    pts = np.array(sorted(set(points)))
    kinds = []
    for tc in pts:
        curv = float(_log_density_slopes(np.array([tc]), p)[1][0])
        kinds.append("maximum" if curv < 0 else "minimum")
    return ModeStructure(pts, tuple(kinds))


@dataclass
class HazardDiagnostic:
    """Per-point hazard shape quantities on a grid.

    ``s = -f'/f``; ``m`` is the polynomial-in-``a`` factor with
    ``s = a' m / ((1 - delta a)^2 + 1)``; ``hr_slope_sign`` is the sign of
    the hazard derivative, from ``h' = h (h - s)``.
    """

    t: np.ndarray
    s: np.ndarray
    m: np.ndarray
    hr: np.ndarray
    hr_slope_sign: np.ndarray

    def shape(self) -> str:
        """Monotonicity pattern of the hazard over the grid."""
        signs = self.hr_slope_sign[self.hr_slope_sign != 0]
        if signs.size == 0:
            return "constant"
        runs = [int(signs[0])]
        for sgn in signs[1:]:
            if sgn != runs[-1]:
                runs.append(int(sgn))
        names = {
            (1,): "increasing",
            (-1,): "decreasing",
            (-1, 1): "bathtub",
            (1, -1): "upside-down bathtub",
        }
        return names.get(tuple(runs), "other")


def hazard_diagnostic(p: BbsParams, grid) -> HazardDiagnostic:
    """Evaluate ``s``, ``m``, the hazard and its slope sign on ``grid``."""
    t = _positive_times(grid)
    if t.ndim != 1 or np.any(np.diff(t) <= 0):
        raise DomainError("grid must be a strictly increasing 1-D sequence")
    a, a1, a2, _ = _a_parts(t, p)
    d = p.delta
    r = _r(a, d)
    m = d * d * a ** 3 - 2 * d * a * a - 2 * a * (d * d - 1) + 2 * d - r * a2 / a1 ** 2
    s = a1 * m / r
    hr = bbs_hr(t, p)
    sign = np.sign(hr - s)
    return HazardDiagnostic(t, s, m, hr, sign)
