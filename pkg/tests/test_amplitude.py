import numpy as np
import pytest

from wavetrap.amplitude import (AmplitudeTerm, TransportTerm, amplitude_bound_table, amplitude_eval,
                                convergence_check, curvature_product, story_census)
from wavetrap.billiard import transfer_monodromy
from wavetrap.errors import ConfigError
from wavetrap.geometry import Scene
from wavetrap.phase import alternating_story
from wavetrap.trapped import build_cutoff

E = np.array([1.0, 0, 0])


def bump(x0, width=0.3):
    def q(X, Xi):
        X = np.atleast_2d(X)
        return np.exp(-np.sum((X - x0) ** 2, axis=1) / width**2)
    return q


def test_empty_story_product_is_one(standard):
    assert curvature_product(standard, [2, 0, 0], E, ()).value == 1.0


def test_axial_products_scale_like_lambda(standard):
    lam = transfer_monodromy(standard).lam
    ratios = [curvature_product(standard, [2, 0, 0], E, alternating_story(2, 2 * r)).value / lam**r
              for r in range(2, 9)]
    assert max(ratios) / min(ratios) < 1.05
    assert min(ratios) > 0


def test_telescoping_product(standard):
    x = np.array([2.05, 0.03, -0.02])
    cp = curvature_product(standard, x, E, alternating_story(2, 6))
    assert cp.value == pytest.approx(np.prod(1 / np.array(cp.factors)), rel=1e-12)
    for n in range(7):
        assert cp.partial(n) * cp.tail(n) == pytest.approx(cp.value, rel=1e-12)


def test_convergence_geometric(standard):
    rep = convergence_check(standard, r_max=8)
    assert rep.alpha < 1
    assert all(p["a_est"] > 0 for p in rep.patterns.values())


def test_asymmetric_patterns_distinct():
    sc = Scene.two_spheres(1.0, 1.6, 4.6)
    rep = convergence_check(sc, r_max=6, samples=[sc.midpoint])
    a = rep.patterns["I2+(2)"]["a_est"]
    b = rep.patterns["I1+(1)"]["a_est"]
    assert abs(a - b) / max(a, b) > 1e-3


def test_symmetric_patterns_equal(standard):
    rep = convergence_check(standard, r_max=6, samples=[standard.midpoint])
    a = rep.patterns["I2+(2)"]["a_est"]
    b = rep.patterns["I1+(1)"]["a_est"]
    assert a == pytest.approx(b, rel=1e-8)


def test_w0_free_transport(standard):
    x0 = np.array([2.0, 0.1, 0.0])
    q = bump(x0)
    for t in (0.0, 0.4, 0.8):
        x = x0 + t * E
        val = amplitude_eval(standard, AmplitudeTerm((), 1, 0), x, t, E, q)
        assert val.real == pytest.approx(0.5, abs=1e-14)
    # generic point: w0 = q(x - t xi)/2
    x = np.array([2.3, 0.2, 0.1])
    val = amplitude_eval(standard, AmplitudeTerm((), 1, 0), x, 0.4, E, q)
    assert val.real == pytest.approx(0.5 * q(x - 0.4 * E, None)[0], rel=1e-14)


def test_w0_vanishes_before_reflection(standard):
    q = bump(np.array([2.0, 0, 0]), 5.0)
    # the reflected leg from (3,0,0) to x has length 1
    val = amplitude_eval(standard, AmplitudeTerm((2,), 1, 0), [2, 0, 0], 0.5, E, q)
    assert val == 0
    val = amplitude_eval(standard, AmplitudeTerm((2,), 1, 0), [2, 0, 0], 2.5, E, q)
    assert val.real > 0


def test_w0_reflected_uses_sqrt_lambda(standard):
    q = bump(np.array([2.0, 0, 0]), 50.0)
    J = (2,)
    lam = curvature_product(standard, [2, 0, 0], E, J, y=standard.midpoint - 20.0 * E).value
    val = amplitude_eval(standard, AmplitudeTerm(J, 1, 0), [2, 0, 0], 2.0, E, q)
    # back point: reflection point (3,0,0) moved back by t - l_J = 1 along E
    assert lam == pytest.approx(1 / 9, rel=1e-12)
    assert val.real == pytest.approx(0.5 * np.sqrt(lam) * q(np.array([2.0, 0, 0]), None)[0], rel=1e-12)


def test_w1_zero_for_constant_symbol(standard):
    def const(X, Xi):
        return np.ones(len(np.atleast_2d(X)))
    val = amplitude_eval(standard, AmplitudeTerm((), 1, 1), [2, 0, 0], 1.0, E, const)
    assert abs(val) < 1e-10


def test_order_two_rejected(standard):
    with pytest.raises(ConfigError):
        TransportTerm(standard, (), E, [0, 0, 0], [2, 0, 0], lambda X, V: np.ones(len(X)), order=2)


def test_amplitude_bound_bounded(standard):
    tab = amplitude_bound_table(standard, max_length=8)
    assert tab["spread"] < 10


def test_census_single_story_before_first_bounce(standard):
    c = story_census(standard, 20.0, n_rays=200)
    early = c.t < c.c1
    assert np.all(c.count[early] == 1)
    assert np.all(np.diff(c.count_unlocalized) >= 0)
    assert 0 < c.slope < np.inf
    assert np.all(c.count <= c.count_unlocalized)
    # localized count grows at a bounded rate: O(1) new stories per unit time
    assert c.slope < 2 / c.c1 + 1


def test_cutoff_amplitude_on_axis(standard):
    q = build_cutoff(standard, eps=0.5, h=0.1)
    val = amplitude_eval(standard, AmplitudeTerm((), 1, 0), standard.midpoint + 0.5 * E, 0.5, 1.2 * E, q)
    assert val.real == pytest.approx(0.5)
