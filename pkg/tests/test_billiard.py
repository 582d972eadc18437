import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavetrap.billiard import (PhasePoint, backward_flow_constrained, flow, reflect_direction,
                               return_map, sphere_lambda, transfer_monodromy)
from wavetrap.errors import ConfigError
from wavetrap.geometry import Scene


def test_reflect_normal_incidence():
    np.testing.assert_allclose(reflect_direction([-1, 0, 0], [1, 0, 0]), [1, 0, 0])


def test_reflect_oblique():
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(reflect_direction([-s, s, 0], [1, 0, 0]), [s, s, 0], atol=1e-15)


def test_reflect_rejects_outgoing():
    with pytest.raises(ConfigError):
        reflect_direction([1, 0, 0], [1, 0, 0])


unit = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1)


@settings(max_examples=200, deadline=None)
@given(unit, unit)
def test_reflection_identities(a, b):
    xi = np.array(a) / np.linalg.norm(a)
    n = np.array(b) / np.linalg.norm(b)
    if xi @ n > -1e-6:
        n = -n
    if xi @ n > -1e-6:
        return
    out = reflect_direction(xi, n)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
    assert out @ n == pytest.approx(-(xi @ n), abs=1e-12)


def test_axial_two_periodic_orbit(standard):
    tr = flow(standard, PhasePoint([2, 0, 0], [1, 0, 0]), 4.0)
    assert tr.story == (2, 1)
    np.testing.assert_allclose(tr.events[0].point, [3, 0, 0], atol=1e-12)
    np.testing.assert_allclose(tr.events[1].point, [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(tr.final.x, [2, 0, 0], atol=1e-12)
    np.testing.assert_allclose(tr.final.xi, [1, 0, 0], atol=1e-12)
    assert not tr.escaped


def test_periodicity_after_many_periods(standard):
    tr = flow(standard, PhasePoint([2, 0, 0], [1, 0, 0]), 40.0)
    assert len(tr.events) == 20
    np.testing.assert_allclose(tr.final.x, [2, 0, 0], atol=1e-10)


def test_miss_escapes(standard):
    tr = flow(standard, PhasePoint([2, 2, 0], [0, 0, 1]), 5.0)
    assert tr.events == []
    np.testing.assert_allclose(tr.final.x, [2, 2, 5])
    assert tr.escaped


def test_escape_time_grows_logarithmically(standard):
    rate = return_map(standard).rate
    times = []
    deltas = [1e-2, 1e-3, 1e-4, 1e-5]
    for d in deltas:
        tr = flow(standard, PhasePoint([2, d, 0], [1, 0, 0]), 80.0)
        assert tr.escaped
        times.append(tr.escape_time)
    slope = np.polyfit(np.log(1 / np.array(deltas)), times, 1)[0]
    assert slope == pytest.approx(1 / rate, rel=0.15)


def test_flow_rejects_interior_start(standard):
    with pytest.raises(ConfigError):
        flow(standard, PhasePoint([0, 0, 0], [1, 0, 0]), 1.0)


def test_backward_free():
    s = Scene.standard()
    x = np.array([2.0, 0.3, 0.1])
    g = np.array([0.0, 0.6, 0.8])
    np.testing.assert_allclose(backward_flow_constrained(s, x, g, (), 3.0), x - 3 * g)


def test_backward_one_reflection_matches_forward(standard):
    x = np.array([2.0, 0.0, 0.0])
    out, ev = backward_flow_constrained(standard, x, [1, 0, 0], (1,), 3.0, return_events=True)
    np.testing.assert_allclose(ev[0][2], [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(out, [3, 0, 0], atol=1e-12)
    # forward oracle: time-reverse and flow with the second obstacle masked
    masked = Scene(standard.body1, type(standard.body2)([100, 0, 0], 1.0))
    fw = flow(masked, PhasePoint(out, [-1, 0, 0]), 3.0)
    np.testing.assert_allclose(fw.final.x, x, atol=1e-12)


def test_backward_story_longer_than_hits(standard):
    x = np.array([2.0, 0.0, 0.0])
    out = backward_flow_constrained(standard, x, [1, 0, 0], (1, 2, 1, 2, 1), 2.0)
    # only the first reflection (on body 1) fits in time 2
    np.testing.assert_allclose(out, [2, 0, 0], atol=1e-12)


def test_return_map_matches_transfer_oracle(standard):
    rm = return_map(standard)
    tm = transfer_monodromy(standard)
    lam_oracle = (3 - 2 * np.sqrt(2)) ** 4
    assert tm.lam == pytest.approx(lam_oracle, rel=1e-10)
    assert rm.lam == pytest.approx(lam_oracle, rel=1e-4)
    assert sphere_lambda(1, 1, 2) == pytest.approx(lam_oracle, rel=1e-10)
    np.testing.assert_allclose(rm.block_dets, 1.0, atol=1e-8)


def test_lambda_decreases_with_distance():
    assert sphere_lambda(1, 1, 8) < sphere_lambda(1, 1, 2)
    far = Scene.two_spheres(1.0, 1.0, 10.0)
    assert return_map(far).lam < return_map(Scene.standard()).lam
