import numpy as np
import pytest
from sklearn.base import clone

from wavetrap.fitting import ExponentialFit, LinearFit, PowerLawFit


def test_power_law_exact():
    t = np.linspace(1, 20, 30)
    f = PowerLawFit().fit(t, 3.0 * t**-1.5)
    assert f.exponent_ == pytest.approx(-1.5, abs=1e-12)
    assert f.r2_ == pytest.approx(1.0)
    np.testing.assert_allclose(f.predict(t), 3.0 * t**-1.5, rtol=1e-10)


def test_exponential_rate():
    t = np.linspace(0, 10, 25)
    f = ExponentialFit().fit(t, 2.0 * np.exp(-0.3 * t))
    assert f.rate_ == pytest.approx(0.3, abs=1e-12)


def test_linear_and_clone():
    x = np.arange(10.0)
    f = LinearFit().fit(x, 2 * x + 1)
    assert f.slope_ == pytest.approx(2.0) and f.intercept_ == pytest.approx(1.0)
    g = clone(f)
    assert not hasattr(g, "slope_")
    assert g.get_params() == f.get_params()
