import numpy as np
import pytest

from wavetrap.errors import ConfigError
from wavetrap.geometry import (Ellipsoid, GaugeWeight, ImplicitBody, Scene, Sphere, scene_from_dict,
                               tangent_basis, trapped_ray)


def test_sphere_hit_oracle():
    s = Sphere([0, 0, 0], 1.0)
    hit = s.intersect([3, 0, 0], [-1, 0, 0])
    np.testing.assert_allclose(hit.point, [1, 0, 0], atol=1e-12)
    assert hit.length == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(hit.normal, [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(s.shape_operator(hit.point), np.eye(2), atol=1e-12)


def test_sphere_miss_when_pointing_away():
    assert Sphere([0, 0, 0], 1.0).intersect([3, 0, 0], [1, 0, 0]) is None


def test_ellipsoid_hit_oracle():
    e = Ellipsoid([0, 0, 0], [2, 1, 1])
    hit = e.intersect([5, 0, 0], [-1, 0, 0])
    np.testing.assert_allclose(hit.point, [2, 0, 0], atol=1e-12)
    assert hit.length == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(hit.normal, [1, 0, 0], atol=1e-12)


def test_ellipsoid_hit_matches_quadratic_root(rng):
    e = Ellipsoid([0.3, -0.2, 0.1], [2.0, 1.0, 1.5])
    for _ in range(20):
        o = rng.normal(size=3) * 6
        o *= 6 / np.linalg.norm(o)
        d = -o / np.linalg.norm(o) + 0.1 * rng.normal(size=3)
        d /= np.linalg.norm(d)
        # closed-form root of the axis-aligned quadric
        A = np.array([2.0, 1.0, 1.5]) ** -2
        oc = o - e.center
        a, b, c = np.sum(A * d * d), 2 * np.sum(A * oc * d), np.sum(A * oc * oc) - 1
        disc = b * b - 4 * a * c
        hit = e.intersect(o, d)
        if disc <= 0:
            assert hit is None
            continue
        root = (-b - np.sqrt(disc)) / (2 * a)
        assert hit.length == pytest.approx(root, abs=1e-10)


@pytest.mark.parametrize("b2, a1, a2, gap", [
    (Sphere([4, 0, 0], 1), [1, 0, 0], [3, 0, 0], 2.0),
    (Sphere([0, 6, 0], 2), [0, 1, 0], [0, 4, 0], 3.0),
])
def test_trapped_ray_spheres(b2, a1, a2, gap):
    r = trapped_ray(Sphere([0, 0, 0], 1), b2)
    np.testing.assert_allclose(r.a1, a1, atol=1e-10)
    np.testing.assert_allclose(r.a2, a2, atol=1e-10)
    assert r.gap == pytest.approx(gap, abs=1e-10)
    assert r.residual < 1e-10


def test_trapped_ray_sphere_ellipsoid():
    r = trapped_ray(Sphere([0, 0, 0], 1), Ellipsoid([5, 0, 0], [1, 2, 2]))
    assert r.gap == pytest.approx(3.0, abs=1e-10)
    np.testing.assert_allclose(r.a1[1:], 0, atol=1e-8)
    np.testing.assert_allclose(r.a2[1:], 0, atol=1e-8)


def test_trapped_ray_is_locally_minimal(rng):
    from scipy.spatial.transform import Rotation
    b1 = Ellipsoid([0, 0, 0], [1.0, 1.3, 0.8], Rotation.from_rotvec([0.2, 0.1, -0.3]))
    b2 = Ellipsoid([4.5, 0.5, -0.3], [1.2, 0.9, 1.1], Rotation.from_rotvec([-0.1, 0.4, 0.2]))
    r = trapped_ray(b1, b2)
    for _ in range(100):
        p1 = b1.support(b1.normal(r.a1) + 0.05 * rng.normal(size=3))
        p2 = b2.support(b2.normal(r.a2) + 0.05 * rng.normal(size=3))
        assert np.linalg.norm(p2 - p1) >= r.gap - 1e-12


def test_strict_convexity_sampled(standard, rng):
    assert standard.body1.min_curvature(1000, rng) > 0
    e = Ellipsoid([0, 0, 0], [2, 1, 0.5])
    assert e.min_curvature(1000, rng) > 0


def test_implicit_body_matches_sphere():
    imp = ImplicitBody(lambda x: x @ x - 1.0, [0, 0, 0], bound=1.0)
    hit = imp.intersect([3, 0.2, 0], [-1, 0, 0])
    s = Sphere([0, 0, 0], 1).intersect([3, 0.2, 0], [-1, 0, 0])
    assert hit.length == pytest.approx(s.length, abs=1e-10)
    np.testing.assert_allclose(imp.shape_operator(s.point), Sphere([0, 0, 0], 1).shape_operator(s.point),
                               atol=1e-5)


def test_gauge_examples():
    g = GaugeWeight.from_params(3, 2, 1.0)
    assert g.value(np.array([0, 0, 2.0])) == pytest.approx(2.0)
    np.testing.assert_allclose(g.gradient(np.array([0, 0, 2.0])), [0, 0, 1])
    eps = (1 + np.sqrt(3)) / 4
    g2 = GaugeWeight([1.0, eps, eps])
    assert g2.value(np.array([1.0, 0, 0])) == pytest.approx(1.0)


def test_gauge_homogeneity_and_gradient(rng):
    g = GaugeWeight([1.0, 0.7, 0.4])
    for _ in range(50):
        x = rng.normal(size=3)
        assert g.value(2 * x) == pytest.approx(2 * g.value(x), rel=1e-12)
        h = 1e-6
        fd = np.array([(g.value(x + h * e) - g.value(x - h * e)) / (2 * h) for e in np.eye(3)])
        np.testing.assert_allclose(g.gradient(x), fd, rtol=1e-6, atol=1e-9)


def test_gauge_gradient_at_center_rejected():
    with pytest.raises(ConfigError):
        GaugeWeight([1.0, 1.0, 1.0]).gradient(np.zeros(3))


def test_scene_roundtrip_and_errors(standard):
    s2 = scene_from_dict(standard.to_dict())
    assert s2.gap == pytest.approx(standard.gap)
    with pytest.raises(ConfigError):
        scene_from_dict({"body1": {"kind": "sphere", "center": [0, 0, 0], "radius": 1}})
    with pytest.raises(ConfigError):
        Scene.two_spheres(1.0, 1.0, 1.5)     # overlapping


def test_tangent_basis_orthonormal(rng):
    for _ in range(20):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        t1, t2 = tangent_basis(n)
        M = np.column_stack([t1, t2, n])
        np.testing.assert_allclose(M.T @ M, np.eye(3), atol=1e-12)
