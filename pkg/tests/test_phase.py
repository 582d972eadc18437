import numpy as np
import pytest

from wavetrap.errors import DomainError, FocalPointError
from wavetrap.geometry import Sphere, tangent_basis
from wavetrap.phase import (PhaseQuery, PointSource, WavefrontSample, alternating_story,
                            derivative_growth_certificate, domain_threshold, evaluate_phase,
                            fd_gradient, gap_samples, pencil_reflection_check, property_sampling,
                            propagate_wavefront, reflect_wavefront, solve_path)

Y = np.array([-10.0, 0, 0])
E = np.array([1.0, 0, 0])


def test_free_phase(standard):
    x = np.array([2.0, 0.1, -0.05])
    xi = np.array([2.0, 0.2, 0.0])
    s = evaluate_phase(standard, PhaseQuery(x, xi, (), Y, 1))
    d = xi / np.linalg.norm(xi)
    assert s.phase == pytest.approx((x - Y) @ d, abs=1e-14)
    np.testing.assert_allclose(s.grad, d)


def test_axial_single_reflection_phase(standard):
    s = evaluate_phase(standard, PhaseQuery([2, 0, 0], E, (2,), Y, 1))
    assert s.phase == pytest.approx(14.0, abs=1e-10)
    np.testing.assert_allclose(s.points[0], [3, 0, 0], atol=1e-10)
    np.testing.assert_allclose(s.grad, [-1, 0, 0], atol=1e-12)
    # mirror of radius 1 at distance 1: curvature 2 / (1 + 2) in both directions
    np.testing.assert_allclose(s.curvature_eigenvalues, [2 / 3, 2 / 3], atol=1e-10)


def test_eikonal_against_fd(standard, rng):
    X = gap_samples(standard, 20, seed=rng)
    for J in [(2,), (2, 1), (2, 1, 2, 1)]:
        for x in X:
            s = evaluate_phase(standard, PhaseQuery(x, E, J, Y, 1))
            g = fd_gradient(standard, x, E, J, Y, points=s.points)
            np.testing.assert_allclose(g, s.grad, atol=1e-8)
            assert np.linalg.norm(g) == pytest.approx(1.0, abs=1e-8)


def test_hessian_against_fd(standard):
    x = np.array([2.1, 0.05, -0.03])
    J = (2, 1, 2)
    s = evaluate_phase(standard, PhaseQuery(x, E, J, Y, 1))
    h = 1e-5
    cols = []
    for e in np.eye(3):
        gp = evaluate_phase(standard, PhaseQuery(x + h * e, E, J, Y, 1), seeds=[s.points],
                            with_curvature=False).grad
        gm = evaluate_phase(standard, PhaseQuery(x - h * e, E, J, Y, 1), seeds=[s.points],
                            with_curvature=False).grad
        cols.append((gp - gm) / (2 * h))
    np.testing.assert_allclose(np.column_stack(cols), s.hessian, atol=1e-6)


def test_inside_obstacle_is_domain_error(standard):
    with pytest.raises(DomainError):
        evaluate_phase(standard, PhaseQuery([0, 0, 0], E, (2,), Y, 1))


def test_point_source_path_is_fermat():
    from wavetrap.geometry import Scene
    sc = Scene.standard()
    p = solve_path(sc, [2, 0.1, 0], (2,), PointSource(np.array([2.0, -0.1, 0.0])))
    # law of reflection: equal angles with the normal
    n = sc.body2.normal(p.points[0])
    a = p.points[0] - np.array([2.0, -0.1, 0.0])
    b = np.array([2, 0.1, 0]) - p.points[0]
    assert (a / np.linalg.norm(a)) @ n == pytest.approx(-(b / np.linalg.norm(b)) @ n, abs=1e-10)


def _sample(H, grad=(1.0, 0, 0)):
    return WavefrontSample(x=np.zeros(3), phase=0.0, grad=np.array(grad), hessian=np.asarray(H))


def test_propagate_plane_stays_plane():
    s = propagate_wavefront(_sample(np.zeros((3, 3))), 5.0)
    np.testing.assert_allclose(s.hessian, 0)
    np.testing.assert_allclose(s.x, [5, 0, 0])


@pytest.mark.parametrize("dist, tau", [(1.0, 2.0), (3.0, 0.5), (0.2, 10.0)])
def test_propagate_spherical_front(dist, tau):
    H = PointSource(np.array([-dist, 0, 0])).hess(np.zeros(3))
    s = propagate_wavefront(_sample(H), tau)
    np.testing.assert_allclose(s.curvature_eigenvalues, [1 / (dist + tau)] * 2, atol=1e-13)


def test_propagate_psd_monotone(rng):
    for _ in range(30):
        A = rng.normal(size=(2, 2))
        K = A @ A.T
        H = np.zeros((3, 3))
        H[1:, 1:] = K
        s = propagate_wavefront(_sample(H), 0.7)
        ev = s.curvature_eigenvalues
        assert ev.min() >= -1e-14
        assert ev.max() <= np.linalg.eigvalsh(K).max() + 1e-14


def test_focal_point_detected():
    H = np.diag([0.0, -1.0, -1.0])
    with pytest.raises(FocalPointError):
        propagate_wavefront(_sample(H), 2.0)


def test_plane_wave_normal_incidence_mirror():
    sphere = Sphere([0, 0, 0], 1.0)
    hit = sphere.intersect([3, 0, 0], [-1, 0, 0])
    s = reflect_wavefront(_sample(np.zeros((3, 3)), grad=(-1, 0, 0)), hit)
    np.testing.assert_allclose(s.grad, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(s.curvature_eigenvalues, [2, 2], atol=1e-12)


def test_reflection_lower_bound_random_incidence(standard, rng):
    for _ in range(20):
        x = np.array([2.0, 0, 0]) + rng.normal(scale=0.1, size=3)
        g = np.array([1.0, 0, 0]) + rng.normal(scale=0.3, size=3)
        g /= np.linalg.norm(g)
        A = rng.normal(size=(2, 2))
        t1, t2 = tangent_basis(g)
        T = np.column_stack([t1, t2])
        H = T @ (A @ A.T) @ T.T
        hit = standard.body2.intersect(x, g)
        if hit is None:
            continue
        out = reflect_wavefront(propagate_wavefront(_sample(H, g), hit.length), hit)
        assert out.curvature_eigenvalues.min() >= 2 * abs(hit.cos_incidence) * 1.0 - 1e-10


def test_pencil_check_agrees(standard, rng):
    for _ in range(5):
        x = np.array([2.0, 0, 0]) + rng.normal(scale=0.05, size=3)
        g = np.array([1.0, 0, 0]) + rng.normal(scale=0.1, size=3)
        g /= np.linalg.norm(g)
        t1, t2 = tangent_basis(g)
        T = np.column_stack([t1, t2])
        H = T @ np.diag([0.3, 0.1]) @ T.T
        r = pencil_reflection_check(standard, WavefrontSample(x, 0.0, g, H), 2)
        assert r["error"] <= 1e-5 * max(1.0, r["scale"])


def test_two_normal_reflections_match_transfer(standard):
    # one period of curvature map starting from a plane wave at the midpoint
    s = WavefrontSample(np.array([2.0, 0, 0]), 0.0, np.array([1.0, 0, 0]), np.zeros((3, 3)))
    for body in (2, 1):
        hit = standard.body(body).intersect(s.x, s.grad)
        s = reflect_wavefront(propagate_wavefront(s, hit.length), hit)
    # ray-transfer oracle: curvature k -> k/(1+tau k) over free legs, +2 at each mirror
    k = 0.0
    for tau in (1.0, 2.0):
        k = k / (1 + tau * k) + 2.0
    np.testing.assert_allclose(s.curvature_eigenvalues, [k, k], atol=1e-12)


def test_derivative_growth_bounded(standard):
    tab = derivative_growth_certificate(standard, max_length=6)
    assert all(r["m0"] == pytest.approx(1.0, abs=1e-12) for r in tab.rows)
    m1 = [r["m1_x"] for r in tab.rows[1:]]
    assert max(m1) < 5.0
    assert np.isfinite(tab.slope_xi)


def test_property_sampling_inner_tube(standard):
    res = property_sampling(standard, max_length=4, m=10, radius=0.1)
    assert res.p2_failures == 0
    assert res.p3_failures == 0


def test_domain_threshold_standard(standard):
    dt = domain_threshold(standard, max_length=6, m=8)
    assert dt.threshold == 0


def test_alternating_story():
    assert alternating_story(2, 5) == (2, 1, 2, 1, 2)
    assert alternating_story(1, 0) == ()
