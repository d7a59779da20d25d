import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from bimodal_bs.errors import BracketError, DomainError, OptimizationError, QuadratureError
from bimodal_bs.numerics import (
    OptimizerSettings, QuadratureSettings, RngStream, find_root, find_roots_monotone,
    integrate_interval, integrate_positive_axis, integrate_real_line, minimize,
    numeric_gradient, numeric_hessian, std_normal_cdf, std_normal_pdf, std_normal_ppf,
    std_normal_sf,
)


def test_normal_functions_against_scipy():
    x = np.linspace(-38, 38, 301)
    assert np.allclose(std_normal_pdf(x), stats.norm.pdf(x), rtol=1e-14, atol=0)
    assert np.allclose(std_normal_cdf(x), stats.norm.cdf(x), rtol=1e-13, atol=1e-300)
    assert np.allclose(std_normal_sf(x), stats.norm.sf(x), rtol=1e-13, atol=1e-300)
    u = np.linspace(1e-12, 1 - 1e-12, 101)
    assert np.allclose(std_normal_cdf(std_normal_ppf(u)), u, atol=1e-15)
    assert isinstance(std_normal_cdf(0.3), float)


def test_normal_rejects_nonfinite():
    with pytest.raises(DomainError):
        std_normal_cdf(float("nan"))
    with pytest.raises(DomainError):
        std_normal_ppf(1.0)


def test_find_root_examples():
    assert abs(find_root(lambda x: x * x - 2, 0, 2) - math.sqrt(2)) < 1e-12
    assert abs(find_root(math.cos, 0, 3) - math.pi / 2) < 1e-12
    with pytest.raises(BracketError):
        find_root(lambda x: x * x + 1, -1, 1)


def test_find_roots_monotone_vectorised():
    targets = np.array([-3.0, 0.0, 0.5, 7.0])
    r = find_roots_monotone(np.sinh, np.cosh, targets, -10, 10)
    assert np.allclose(np.sinh(r), targets, atol=1e-11)


def test_integrate_interval_smooth_and_singular():
    assert abs(integrate_interval(np.sin, 0, math.pi) - 2.0) < 1e-12
    # integrable endpoint singularity
    v = integrate_interval(lambda x: 1 / np.sqrt(x), 0, 1, 1e-9, 1e-9)
    assert abs(v - 2.0) < 1e-7


def test_integrate_positive_axis_with_and_without_quantile():
    f = lambda t: t * np.exp(-t)  # noqa: E731
    assert abs(integrate_positive_axis(f) - 1.0) < 1e-9
    q = lambda u: -math.log1p(-u)  # noqa: E731
    assert abs(integrate_positive_axis(lambda t: np.exp(-t), quantile=q) - 1.0) < 1e-9
    assert abs(integrate_positive_axis(lambda t: np.exp(-t) / np.sqrt(t)) - math.sqrt(math.pi)) < 1e-7


def test_integrate_real_line_normal_moments():
    for k, m in [(0, 1.0), (2, 1.0), (4, 3.0)]:
        v = integrate_real_line(lambda x: x ** k * stats.norm.pdf(x))
        assert abs(v - m) < 1e-9


def test_quadrature_error_on_nonfinite():
    with pytest.raises(QuadratureError):
        integrate_interval(lambda x: np.where(x > 0.5, np.nan, 1.0), 0, 1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-3, 3))
def test_quadrature_matches_scipy_on_gamma_like(shape, shift):
    f = lambda t: t ** (shape - 1) * np.exp(-t) * (1 + 0.1 * np.sin(t + shift))  # noqa: E731
    ours = integrate_positive_axis(f, QuadratureSettings(1e-10, 1e-10))
    ref = integrate.quad(f, 0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=500)[0]
    assert abs(ours - ref) <= 1e-7 * max(1.0, abs(ref))


def test_minimize_rosenbrock():
    rosen = lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2  # noqa: E731
    res = minimize(rosen, [-1.2, 1.0], settings=OptimizerSettings(max_iterations=2000))
    assert res.converged
    assert np.allclose(res.x, [1, 1], atol=1e-5)
    x, fun, conv, it = res
    assert fun < 1e-10 and it > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_minimize_random_quadratics(seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(3, 3))
    Q = A @ A.T + 0.5 * np.eye(3)
    b = r.normal(size=3)
    res = minimize(lambda x: 0.5 * x @ Q @ x - b @ x, np.zeros(3), gradient=lambda x: Q @ x - b)
    assert np.allclose(res.x, np.linalg.solve(Q, b), atol=1e-5)


def test_minimize_handles_infinite_regions():
    # objective infinite for x <= 0; optimum at log(2)... start inside the domain
    f = lambda x: math.inf if x[0] <= 0 else x[0] - 2 * math.log(x[0])  # noqa: E731
    res = minimize(f, [5.0])
    assert abs(res.x[0] - 2.0) < 1e-5
    with pytest.raises(OptimizationError):
        minimize(f, [-1.0])


def test_numeric_derivatives():
    f = lambda x: np.sin(x[0]) * np.exp(x[1])  # noqa: E731
    x = np.array([0.3, -0.2])
    g = numeric_gradient(f, x)
    assert np.allclose(g, [np.cos(0.3) * np.exp(-0.2), np.sin(0.3) * np.exp(-0.2)], rtol=1e-8)
    H = numeric_hessian(f, x)
    ref = np.array([[-np.sin(0.3), np.cos(0.3)], [np.cos(0.3), np.sin(0.3)]]) * np.exp(-0.2)
    assert np.allclose(H, ref, atol=1e-6)


def test_settings_validation():
    with pytest.raises(DomainError):
        OptimizerSettings(max_iterations=0)
    with pytest.raises(DomainError):
        QuadratureSettings(abs_tol=0)


def test_rng_streams_deterministic_and_independent():
    a = RngStream(42).uniform(5)
    b = RngStream(42).uniform(5)
    assert np.array_equal(a, b)
    s = RngStream(42)
    assert not np.array_equal(s.substream(0).uniform(5), RngStream(42).uniform(5))
    # keys that differ only by a trailing zero must not collide
    assert not np.array_equal(RngStream(7, (3,)).uniform(5), RngStream(7, (3, 0)).uniform(5))
    assert np.all(RngStream(1).uniform(10000) > 0)
