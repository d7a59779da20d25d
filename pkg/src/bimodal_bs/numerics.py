"""Numerical kernels: normal functions, root finding, quadrature, BFGS, RNG.

Everything here is independent of the distributions built on top of it.
The quadrature and the minimizer are written for vectorised numpy
integrands/objectives; scalar callables are accepted and wrapped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize as _sopt
from scipy import special as _special

from .errors import BracketError, DomainError, OptimizationError, QuadratureError

__all__ = [
    "OptimizerSettings",
    "QuadratureSettings",
    "OptimizeResult",
    "RngStream",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_sf",
    "std_normal_ppf",
    "find_root",
    "find_roots_monotone",
    "integrate_interval",
    "integrate_positive_axis",
    "integrate_real_line",
    "minimize",
    "numeric_gradient",
    "numeric_hessian",
    "rng_stream",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# settings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerSettings:
    """Stopping rules for :func:`minimize`.

    Parameters
    ----------
    max_iterations : int
        Hard cap on quasi-Newton iterations.
    gradient_tolerance : float
        Converged when the sup-norm of the gradient falls below this.
    step_tolerance : float
        Converged when the sup-norm of an accepted step falls below this.
    finite_difference_step : float
        Relative step of the central differences used when no gradient is given.
    """

    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    step_tolerance: float = 1e-10
    finite_difference_step: float = 1e-6

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise DomainError("max_iterations must be >= 1")
        for name in ("gradient_tolerance", "step_tolerance", "finite_difference_step"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for the adaptive Gauss-Kronrod integrator."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    upper_truncation_quantile: float = 1.0 - 1e-10
    max_intervals: int = 5000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be > 0")
        if not 0.0 < self.upper_truncation_quantile < 1.0:
            raise DomainError("upper_truncation_quantile must lie in (0, 1)")


# ---------------------------------------------------------------------------
# standard normal
# ---------------------------------------------------------------------------


def _check_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("standard normal functions need finite input")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def std_normal_pdf(x):
    """Standard normal density, elementwise."""
    arr = _check_finite(x)
    return _out(_INV_SQRT_2PI * np.exp(-0.5 * arr * arr), x)


def std_normal_cdf(x):
    """Standard normal CDF, elementwise (Cephes ``ndtr``, |error| < 1e-15)."""
    arr = _check_finite(x)
    return _out(_special.ndtr(arr), x)


def std_normal_sf(x):
    """Upper tail ``1 - Phi(x)`` without cancellation."""
    arr = _check_finite(x)
    return _out(_special.ndtr(-arr), x)


def std_normal_ppf(u):
    """Inverse of :func:`std_normal_cdf` on (0, 1)."""
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0) | ~(arr < 1)):
        raise DomainError("probability must lie in (0, 1)")
    return _out(_special.ndtri(arr), u)


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------


def find_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of a scalar function on a sign-changing bracket.

    Brent's method (inverse quadratic interpolation with bisection
    safeguard), so convergence is guaranteed once the bracket is valid.

    Raises
    ------
    BracketError
        If ``f(lo)`` and ``f(hi)`` have the same strict sign or ``lo >= hi``.
    """
    if not lo < hi:
        raise BracketError(f"need lo < hi, got [{lo}, {hi}]")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo:.3g}, {fhi:.3g}")
    return float(_sopt.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def find_roots_monotone(f, fprime, target, lo, hi, tol=1e-12, max_iter=200):
    """Vectorised solve of ``f(x) = target`` for increasing ``f``.

    Newton steps are taken when they stay inside the current bracket,
    bisection otherwise.  ``lo``/``hi`` are arrays (or scalars) bracketing
    every solution.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    if np.any(f(lo) - target > 0) or np.any(f(hi) - target < 0):
        raise BracketError("initial bracket does not contain every solution")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x) - target
        lo = np.where(fx < 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        d = fprime(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            newton = x - fx / d
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        new = np.where(ok, newton, 0.5 * (lo + hi))
        done = np.abs(new - x) <= tol * np.maximum(1.0, np.abs(x))
        x = new
        if np.all(done | (fx == 0)):
            break
    return x


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

# 15-point Kronrod extension of the 7-point Gauss rule.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_WK = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_GAUSS_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
_WG_FULL = np.concatenate([_WG[:-1], [_WG[-1]], _WG[:-1][::-1]])


def _as_vectorized(f):
    def g(x):
        y = f(x)
        y = np.asarray(y, dtype=float)
        if y.shape != x.shape:
            y = np.array([float(f(float(v))) for v in x.ravel()]).reshape(x.shape)
        return y

    return g


def _gk15(f, lo, hi):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    x = c[:, None] + h[:, None] * _NODES[None, :]
    fx = f(x.ravel()).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        raise QuadratureError("integrand is not finite at a quadrature node")
    kron = h * (fx @ _WK)
    gauss = h * (fx[:, _GAUSS_IDX] @ _WG_FULL)
    return kron, np.abs(kron - gauss)


def integrate_interval(f, a, b, abs_tol=1e-10, rel_tol=1e-10, max_intervals=5000,
                       initial=8, full_output=False):
    """Globally adaptive Gauss-Kronrod (7/15) quadrature on ``[a, b]``.

    ``f`` should accept a 1-D array; a scalar function is wrapped.
    Every round splits the intervals carrying the largest error until the
    summed error estimate satisfies ``err <= max(abs_tol, rel_tol * |I|)``.

    Raises
    ------
    QuadratureError
        When ``max_intervals`` is reached first; carries the best estimate.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise DomainError("finite limits required; use integrate_positive_axis")
    if a == b:
        return (0.0, 0.0) if full_output else 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fv = _as_vectorized(f)
    edges = np.linspace(a, b, int(initial) + 1)
    lo, hi = edges[:-1], edges[1:]
    val, err = _gk15(fv, lo, hi)
    while True:
        total = float(val.sum())
        total_err = float(err.sum())
        tol = max(abs_tol, rel_tol * abs(total))
        if total_err <= tol:
            break
        if lo.size >= max_intervals:
            raise QuadratureError(
                f"no convergence with {lo.size} intervals (err {total_err:.2e} > {tol:.2e})",
                estimate=sign * total, error=total_err,
            )
        order = np.argsort(err)[::-1]
        cum = np.cumsum(err[order])
        nsplit = int(np.searchsorted(cum, total_err - 0.5 * tol)) + 1
        nsplit = min(nsplit, order.size, max_intervals - lo.size)
        nsplit = max(nsplit, 1)
        pick = order[:nsplit]
        keep = np.ones(lo.size, dtype=bool)
        keep[pick] = False
        mid = 0.5 * (lo[pick] + hi[pick])
        if np.any((mid <= lo[pick]) | (mid >= hi[pick])):
            raise QuadratureError("interval width reached machine precision",
                                  estimate=sign * total, error=total_err)
        new_lo = np.concatenate([lo[pick], mid])
        new_hi = np.concatenate([mid, hi[pick]])
        nv, ne = _gk15(fv, new_lo, new_hi)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
    if full_output:
        return sign * total, total_err
    return sign * total


def integrate_positive_axis(f, settings: Optional[QuadratureSettings] = None, quantile=None,
                            full_output=False):
    """Integral of ``f`` over ``(0, inf)``.

    Parameters
    ----------
    f : callable
        Vectorised integrand, finite on ``(0, inf)``.
    settings : QuadratureSettings, optional
    quantile : callable, optional
        Quantile function of the distribution whose tail controls ``f``.
        When given, ``(0, q(upper_truncation_quantile))`` is split at a few
        quantiles and integrated piecewise, then the tail is added in
        doubling blocks until a block contributes less than ``abs_tol``.
        Without it the axis is mapped to ``(0, 1)`` by ``t = x / (1 - x)``.
    """
    s = settings or QuadratureSettings()
    if quantile is None:
        def mapped(x):
            t = x / (1.0 - x)
            return fv(t) / (1.0 - x) ** 2

        fv = _as_vectorized(f)
        return integrate_interval(mapped, 0.0, 1.0, s.abs_tol, s.rel_tol, s.max_intervals,
                                  initial=16, full_output=full_output)

    levels = [1e-6, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1 - 1e-6, s.upper_truncation_quantile]
    pts = sorted({0.0, *(float(quantile(p)) for p in levels if p <= s.upper_truncation_quantile)})
    upper = pts[-1]
    total = 0.0
    total_err = 0.0
    npieces = len(pts) - 1 + 1
    piece_abs = s.abs_tol / (2 * npieces)
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            v, e = integrate_interval(f, a, b, piece_abs, s.rel_tol, s.max_intervals,
                                      full_output=True)
            total += v
            total_err += e
    width = upper
    a = upper
    for _ in range(200):
        v, e = integrate_interval(f, a, a + width, piece_abs, s.rel_tol, s.max_intervals,
                                  full_output=True)
        total += v
        total_err += e
        a += width
        width *= 2.0
        if abs(v) < 0.1 * s.abs_tol:
            break
    else:
        raise QuadratureError("tail did not decay", estimate=total, error=total_err)
    if total_err > max(s.abs_tol, s.rel_tol * abs(total)):
        raise QuadratureError("error budget exceeded", estimate=total, error=total_err)
    return (total, total_err) if full_output else total


def integrate_real_line(f, settings: Optional[QuadratureSettings] = None, full_output=False):
    """Integral of ``f`` over the real line, folded onto ``(0, inf)``."""
    fv = _as_vectorized(f)
    return integrate_positive_axis(lambda t: fv(t) + fv(-t), settings, full_output=full_output)


# ---------------------------------------------------------------------------
# optimisation
# ---------------------------------------------------------------------------


@dataclass
class OptimizeResult:
    """Outcome of :func:`minimize`."""

    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    grad: np.ndarray
    message: str = ""

    def __iter__(self):
        # allows ``argmin, value, converged, iterations = minimize(...)``
        return iter((self.x, self.fun, self.converged, self.iterations))


def numeric_gradient(objective, x, rel_step=1e-6):
    """Central-difference gradient with steps ``rel_step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (objective(x + e) - objective(x - e)) / (2 * h)
    return g


def numeric_hessian(objective, x, rel_step=1e-4):
    """Central-difference Hessian (symmetrised)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    H = np.empty((n, n))
    f0 = objective(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (objective(x + ei) - 2 * f0 + objective(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                objective(x + ei + ej) - objective(x + ei - ej)
                - objective(x - ei + ej) + objective(x - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


def minimize(objective, start, gradient=None, settings: Optional[OptimizerSettings] = None):
    """Unconstrained quasi-Newton (BFGS) minimisation.

    The inverse Hessian approximation is updated only when the curvature
    condition ``s.y > 0`` holds.  Steps come from a backtracking line
    search with quadratic interpolation and the Armijo condition; trial
    points with a non-finite objective are treated as failures and the step
    is shrunk.

    Returns
    -------
    OptimizeResult
        Unpacks as ``(argmin, value, converged, iterations)``.

    Raises
    ------
    OptimizationError
        If the objective is not finite at ``start``.
    """
    s = settings or OptimizerSettings()
    x = np.array(start, dtype=float).ravel()
    n = x.size

    def obj(v):
        try:
            val = float(objective(v))
        except (FloatingPointError, OverflowError, ZeroDivisionError, ValueError):
            return math.inf
        return val if math.isfinite(val) else math.inf

    if gradient is None:
        def grad(v):
            return numeric_gradient(obj, v, s.finite_difference_step)
    else:
        def grad(v):
            return np.asarray(gradient(v), dtype=float).ravel()

    f = obj(x)
    if not math.isfinite(f):
        raise OptimizationError("objective is not finite at the starting point")
    g = grad(x)
    if not np.all(np.isfinite(g)):
        raise OptimizationError("gradient is not finite at the starting point")
    H = np.eye(n)
    fresh = True
    c1 = 1e-4
    message = "maximum iterations reached"
    converged = False
    it = 0
    reset_used = False
    while it < s.max_iterations:
        if np.max(np.abs(g)) <= s.gradient_tolerance:
            converged, message = True, "gradient tolerance reached"
            break
        it += 1
        p = -H @ g
        slope = float(g @ p)
        if not slope < 0:
            H = np.eye(n)
            fresh = True
            p = -g
            slope = float(g @ p)
        if fresh:
            scale = min(1.0, 1.0 / max(np.max(np.abs(p)), 1e-300))
            p = p * scale
            slope *= scale
        step = 1.0
        accepted = False
        while step * np.max(np.abs(p)) > 1e-3 * s.step_tolerance:
            xn = x + step * p
            fn = obj(xn)
            if fn <= f + c1 * step * slope:
                accepted = True
                break
            if math.isfinite(fn):
                denom = 2.0 * (fn - f - step * slope)
                trial = -slope * step * step / denom if denom > 0 else 0.5 * step
                step = min(0.5 * step, max(0.1 * step, trial))
            else:
                step *= 0.1
        if not accepted:
            if not reset_used and not fresh:
                H = np.eye(n)
                fresh = True
                reset_used = True
                continue
            message = "line search could not decrease the objective"
            break
        reset_used = False
        sk = xn - x
        gn = grad(xn)
        if not np.all(np.isfinite(gn)):
            message = "gradient became non-finite"
            x, f = xn, fn
            break
        yk = gn - g
        sy = float(sk @ yk)
        if sy > 1e-12 * float(np.linalg.norm(sk) * np.linalg.norm(yk)):
            if fresh:
                H = np.eye(n) * (sy / float(yk @ yk))
                fresh = False
            rho = 1.0 / sy
            Hy = H @ yk
            H = H - rho * (np.outer(sk, Hy) + np.outer(Hy, sk)) + (rho * rho * float(yk @ Hy) + rho) * np.outer(sk, sk)
        x, f, g = xn, fn, gn
        if np.max(np.abs(sk)) < s.step_tolerance:
            converged, message = True, "step tolerance reached"
            break
    else:
        if np.max(np.abs(g)) <= s.gradient_tolerance:
            converged, message = True, "gradient tolerance reached"
    return OptimizeResult(x=x, fun=f, converged=converged, iterations=it, grad=g, message=message)


# ---------------------------------------------------------------------------
# random numbers
# ---------------------------------------------------------------------------


class RngStream:
    """Seeded stream of pseudo-random numbers (PCG64 via ``SeedSequence``).

    ``substream(i)`` gives an independent stream keyed by ``(seed, i)``, so a
    replication's draws do not depend on how many other replications ran.
    """

    def __init__(self, seed: int, key: tuple = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        # the key length is mixed in because SeedSequence treats trailing
        # zero words as padding: [s, r] and [s, r, 0] would collide
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF, len(self.key), *self.key]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def uniform(self, size=None):
        """Uniform(0, 1) draws; never returns exactly 0."""
        u = self._gen.random(size)
        return np.where(u == 0.0, np.nextafter(0.0, 1.0), u) if size is not None else (u or 5e-324)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.key + (int(index),))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def rng_stream(seed: int) -> RngStream:
    """Deterministic uniform stream for ``seed``."""
    return RngStream(seed)
