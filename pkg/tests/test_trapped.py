import numpy as np
import pytest

from wavetrap.errors import ConfigError, ResolutionError
from wavetrap.trapped import (Cylinder, build_cutoff, compute_trapped_set, expansion_rate,
                              shrinkage_fit, slice_grid, smoothstep, trapped_margin, trapping_time)


@pytest.fixture(scope="module")
def D(standard):
    return Cylinder.around(standard)


def test_axial_ray_trapped_for_all_T(standard, D):
    for T in (0.0, 5.0, 50.0, 200.0):
        tau = trapping_time(standard, D, [[2, 0, 0]], [[1, 0, 0]], T)
        assert tau[0] > T


def test_outside_point_not_member(standard, D):
    tau = trapping_time(standard, D, [[2, 1.0, 0]], [[1, 0, 0]], 0.0)
    assert not tau[0] > 0.0


def test_T0_membership_equals_position_in_D(standard, D, rng):
    X = standard.midpoint + rng.uniform(-0.4, 0.4, size=(200, 3)) * [2.5, 1, 1]
    V = rng.normal(size=(200, 3))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    inside = D.contains(X)
    # avoid points exactly on a wall of D
    keep = np.abs(D.signed_margin(X)) > 1e-9
    member = trapping_time(standard, D, X, V, 0.0) > 0.0
    np.testing.assert_array_equal(member[keep], inside[keep])


def test_membership_monotone_in_T(standard):
    g = slice_grid(standard, Cylinder.around(standard), 8.0, n=61)
    prev = g.member_at(0.0)
    for T in (1.0, 2.0, 4.0, 8.0):
        cur = g.member_at(T)
        assert not (cur & ~prev).any()
        prev = cur


def test_slice_symmetric_under_reflection(standard):
    g = slice_grid(standard, Cylinder.around(standard), 6.0, n=41)
    np.testing.assert_array_equal(g.member_at(6.0), g.member_at(6.0)[::-1, ::-1])


def test_trapped_margin_sign_matches_membership(standard, D, rng):
    X = standard.midpoint + rng.uniform(-0.2, 0.2, size=(300, 3)) * [1, 1, 1]
    V = standard.axis + rng.normal(scale=0.05, size=(300, 3))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    T = 4.0
    m = trapped_margin(standard, D, X, V, T)
    tau = trapping_time(standard, D, X, V, T)
    decided = np.abs(m) > 1e-9
    np.testing.assert_array_equal((m > 0)[decided], (tau > T)[decided])


def test_shrinkage_rate_near_monodromy(standard):
    res = shrinkage_fit(standard, n=301)
    c = expansion_rate(standard)
    assert res.c_est == pytest.approx(c, rel=0.25)
    assert np.all(res.distances[np.isfinite(res.distances)] > 0)


def test_compute_trapped_set_warns_when_coarse(standard):
    with pytest.warns(RuntimeWarning):
        g = compute_trapped_set(standard, T=20.0, spatial_res=3, angular_res=3, axial_res=3)
    assert g.membership.shape == (27, 9)
    with pytest.raises(ConfigError):
        g.member_at(30.0)


def test_smoothstep_endpoints():
    s = smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_allclose(s, [0, 0, 0.5, 1, 1])
    x = np.linspace(0, 1, 1001)
    assert np.all(np.diff(smoothstep(x)) >= 0)


def test_cutoff_values(standard):
    q = build_cutoff(standard, eps=0.5, h=0.1)
    xi = 1.2 * standard.axis
    assert q(standard.midpoint, xi)[0] == pytest.approx(1.0)
    assert q(standard.midpoint + [0, 2.0, 0], xi)[0] == 0.0
    assert q(standard.midpoint, 5.0 * standard.axis)[0] == 0.0


def test_cutoff_resolution_error(standard):
    with pytest.raises(ResolutionError):
        build_cutoff(standard, eps=2.0, h=1e-3, resolution=1e-2)
    with pytest.raises(ConfigError):
        build_cutoff(standard, eps=0.5, h=0.1, alpha0=2.0, beta0=1.0)
