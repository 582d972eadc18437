import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from wavetrap.errors import ConfigError
from wavetrap.morawetz import (DogBone, GaugeMultiplier, TwoCenterWeight, bilaplacian_threshold,
                               cylindrical_extension_check, derivative_check,
                               flux_and_identity_certificate, gauge_bilaplacian, illumination,
                               illumination_gauge, lambda2_closed, lambda2_matrix, log_factor,
                               sphere_bilaplacian_check, two_center_analysis, verify_bilaplacian)

EPS_EL = (1 + math.sqrt(3)) / 4


def test_thresholds():
    assert bilaplacian_threshold(4, 2).eps0 == pytest.approx(EPS_EL, abs=1e-15)
    assert bilaplacian_threshold(4, 3).eps0 == 0.0
    assert bilaplacian_threshold(4, 1).eps0 == pytest.approx(4 / 5)
    assert bilaplacian_threshold(3, 2).eps0 == pytest.approx(1.0)
    assert bilaplacian_threshold(3, 2).note
    with pytest.raises(ConfigError):
        bilaplacian_threshold(2, 2)
    with pytest.raises(ConfigError):
        bilaplacian_threshold(3, 5)


def test_k2_threshold_is_root_of_A():
    for n in (3, 4, 5, 7, 10):
        th = bilaplacian_threshold(n, 2)
        assert abs(th.A(th.eps0)) < 1e-12
        lo = 1 / n - math.sqrt(2 * (n - 2) * (n - 1)) / (n * (n - 2))
        assert abs(th.A(lo)) < 1e-12


@pytest.mark.parametrize("n,k,eps", [(4, 2, 0.7), (3, 1, 0.4), (5, 3, 0.3), (4, 1, 0.9)])
def test_closed_form_matches_symbolic(n, k, eps):
    xs = sp.symbols(f"x0:{n}", real=True)
    e = sp.Rational(str(eps))
    rho = sp.sqrt(sum(xs[:k][i] ** 2 for i in range(k)) + e * sum(x**2 for x in xs[k:]))
    lap = lambda f: sum(sp.diff(f, x, 2) for x in xs)
    bil = lap(lap(rho))
    pt = np.linspace(0.3, 1.1, n)
    val = float(bil.subs(dict(zip(xs, [sp.Rational(str(round(p, 6))) for p in pt]))))
    got = gauge_bilaplacian(n, k, eps, np.round(pt, 6)[None, :])[0]
    assert got == pytest.approx(val, rel=1e-10)


def test_sphere_gauge_limit():
    for n, k in [(3, 1), (4, 2), (5, 3), (6, 2)]:
        assert sphere_bilaplacian_check(n, k) < 1e-10


def test_verify_nonpositive_at_threshold():
    v = verify_bilaplacian(4, 2, EPS_EL, m=300)
    assert v.nonpositive
    assert abs(v.A_value) < 1e-12


def test_verify_detects_positive_below_threshold():
    v = verify_bilaplacian(4, 2, 0.5, m=300)
    assert not v.nonpositive
    assert bilaplacian_threshold(4, 2).A(0.5) > 0


@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
def test_n3_k3_nonpositive(eps):
    assert verify_bilaplacian(3, 3, eps, m=200).nonpositive


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 7), st.data())
def test_above_threshold_nonpositive(n, data):
    k = data.draw(st.integers(1, n))
    th = bilaplacian_threshold(n, k)
    if th.eps0 > 1:
        return
    eps = data.draw(st.floats(max(th.eps0, 1e-3), 1.0))
    X = np.random.default_rng(0).normal(size=(200, n))
    assert np.all(gauge_bilaplacian(n, k, eps, X) <= 1e-10 * np.linalg.norm(X, axis=1) ** -3)


def test_gauge_derivatives_fd():
    w = GaugeMultiplier(4, 2, 0.8)
    X = np.random.default_rng(1).normal(size=(20, 4)) + 0.2
    rep = derivative_check(w, X)
    assert rep["gradient"] < 1e-6 and rep["hessian"] < 1e-5


def test_lambda2_collinear():
    assert lambda2_closed([[1, 0, 0]], np.array([4.0, 0, 0]))[0] == pytest.approx(4 / 3)


def test_lambda2_matches_eigensolve(rng):
    c = np.array([4.0, 0, 0])
    X = rng.normal(size=(500, 3)) * 3
    np.testing.assert_allclose(lambda2_closed(X, c), lambda2_matrix(X, c), rtol=1e-10, atol=1e-12)


def test_two_center_weight_derivatives(rng):
    w = TwoCenterWeight(np.array([4.0, 0, 0]))
    X = rng.normal(size=(20, 3)) * 2 + [2, 0, 0]
    rep = derivative_check(w, X)
    assert rep["gradient"] < 1e-6 and rep["hessian"] < 1e-5
    np.testing.assert_allclose(np.trace(w.hessian(X), axis1=1, axis2=2), w.laplacian(X), rtol=1e-12)


def test_excluded_measure_decreases():
    rep = two_center_analysis([4, 0, 0], 6.0, m=20000)
    ms = [rep.excluded_measure[a] for a in (0.2, 0.1, 0.05)]
    assert ms[0] > ms[1] > ms[2]
    assert rep.lambda2_max_error < 1e-10
    assert all(v > 0 for v in rep.form_constant.values())


def test_two_center_certificate(standard):
    rep = flux_and_identity_certificate(TwoCenterWeight(np.array([4.0, 0, 0])), standard,
                                        m_boundary=500, m_interior=300)
    assert rep.passes
    assert rep.bilaplacian_fd_max_abs <= 1e-6


def test_dogbone_illuminated():
    rep = illumination(DogBone(), illumination_gauge(EPS_EL))
    assert rep.illuminated and rep.margin > 0
    assert not illumination(DogBone(gamma=3.0), illumination_gauge(EPS_EL)).illuminated
    with pytest.raises(ConfigError):
        illumination(DogBone(), illumination_gauge(EPS_EL), m=100)


def test_cylindrical_extension():
    assert cylindrical_extension_check(DogBone(), illumination_gauge(EPS_EL)) < 1e-8


def test_log_factor():
    assert log_factor(1.0) == pytest.approx(2 * math.log(1 + math.sqrt(2)), abs=1e-14)
    T = 1e6
    assert log_factor(T) / (2 * math.log(2 * T)) == pytest.approx(1.0, abs=1e-6)
    v = log_factor(np.linspace(0.01, 100, 500))
    assert np.all(np.diff(v) > 0)
    with pytest.raises(ConfigError):
        log_factor(0.0)
