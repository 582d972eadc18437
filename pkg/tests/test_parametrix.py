import numpy as np
import pytest

from wavetrap.errors import ConfigError
from wavetrap.parametrix import (ParametrixConfig, chart_hessian_fd, chi0, critical_point,
                                 free_kernel, free_kernel_bruteforce, free_sup, minimal_K,
                                 remainder_budget, remainder_exponent)


def test_remainder_budget_holds_at_K26():
    cfg = ParametrixConfig(h=0.05, eps=0.5, K=26, c_est=0.1)   # c eps = 0.05
    rep = remainder_budget(cfg)
    assert rep["holds"]
    assert rep["simplified_holds"]          # 13 - 10 >= -1
    b = np.array(rep["implied_bound"])
    assert np.all(np.diff(b) < 0)


def test_remainder_budget_rejects_K2():
    with pytest.raises(ConfigError, match="minimal K is"):
        ParametrixConfig(h=0.05, eps=0.5, K=2, c_est=0.1)
    cfg = ParametrixConfig(h=0.05, eps=0.5, K=2)
    cfg.c_est = 0.1
    with pytest.raises(ConfigError, match=f"minimal K is {minimal_K(0.05)}"):
        remainder_budget(cfg)


def test_minimal_K_is_minimal():
    for ce in (0.0, 0.05, 0.1, 0.2):
        K = minimal_K(ce)
        assert remainder_exponent(K, ce) >= -1 - 1e-12
        if K > 0:
            assert remainder_exponent(K - 1, ce) < -1


def test_config_validation():
    with pytest.raises(ConfigError):
        ParametrixConfig(h=0.7, eps=1.0)
    with pytest.raises(ConfigError):
        ParametrixConfig(h=0.05, eps=1.0, k0=3)


def test_free_critical_direction(standard):
    x = np.array([2.0, 0.3, 0.1])
    y = np.array([-5.0, 0.0, 0.2])
    cp = critical_point(standard, x, y, (), s=1.3, sign=1, t=2.0)
    v = (x - y) / np.linalg.norm(x - y)
    np.testing.assert_allclose(cp.xi, 1.3 * v, atol=1e-14)
    assert cp.xi @ (x - y) > 0
    cm = critical_point(standard, x, y, (), s=1.3, sign=-1, t=2.0)
    np.testing.assert_allclose(cm.xi, -1.3 * v, atol=1e-14)


def test_axial_one_reflection_is_axial(standard):
    cp = critical_point(standard, [2, 0, 0], [-10, 0, 0], (2,), s=1.0)
    np.testing.assert_allclose(cp.omega, [1, 0, 0], atol=1e-10)
    np.testing.assert_allclose(cp.first_point, [3, 0, 0], atol=1e-10)


@pytest.mark.parametrize("story", [(2,), (2, 1), (2, 1, 2)])
def test_lagrange_hessian_matches_fd(standard, story):
    x = np.array([2.1, 0.04, -0.03])
    y = np.array([-8.0, 0.1, 0.0])
    cp = critical_point(standard, x, y, story, s=1.2, t=3.0)
    H = chart_hessian_fd(standard, x, y, story, 1.2, 3.0, cp.omega)
    np.testing.assert_allclose(cp.hessian, H, atol=1e-6)


def test_free_kernel_matches_bruteforce():
    h, t = 0.2, 1.0
    x = np.array([0.9, 0.3, 0.1])
    y = np.zeros(3)
    r = np.linalg.norm(x - y)
    k = free_kernel(np.array([r]), t, h)[0]
    b = free_kernel_bruteforce(x, y, t, h)
    assert k == pytest.approx(b, rel=1e-5, abs=1e-8 * abs(b) + 1e-10)


def test_free_kernel_small_t_finite():
    vals = [free_sup(t, 0.05) for t in (1e-3, 1e-2, 0.1)]
    assert np.all(np.isfinite(vals))
    assert max(vals) <= 1.01 * free_kernel(np.array([0.0]), 0.0, 0.05)[0]


def test_chi0_window(standard):
    assert chi0(standard, standard.midpoint)[0] == pytest.approx(1.0)
    assert chi0(standard, standard.midpoint + [0, 1.0, 0])[0] == 0.0
