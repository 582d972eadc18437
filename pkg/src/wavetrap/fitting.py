"""Small regression estimators used for decay and growth rates.

They follow the scikit-learn estimator protocol (constructor stores
hyper-parameters, ``fit`` learns attributes ending in ``_``), so they can
be cloned, inspected with ``get_params`` and scored with ``score``.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import linregress
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ConfigError


class LogLinearFit(RegressorMixin, BaseEstimator):
    """Least-squares line in optionally log-transformed coordinates.

    Parameters
    ----------
    log_x, log_y : bool
        Apply ``log`` to the abscissa / ordinate before fitting.  With both
        set the model is a power law, with only ``log_y`` an exponential.
    min_points : int
        Refuse to fit fewer samples than this.
    """

    def __init__(self, log_x: bool = False, log_y: bool = True, min_points: int = 2):
        self.log_x = log_x
        self.log_y = log_y
        self.min_points = min_points

    def _tx(self, x):
        x = np.asarray(x, dtype=float).ravel()
        return np.log(x) if self.log_x else x

    def fit(self, x, y):
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ConfigError("x and y must have the same length")
        if x.size < self.min_points:
            raise ConfigError(f"need at least {self.min_points} points to fit, got {x.size}")
        if (self.log_y and np.any(y <= 0)) or (self.log_x and np.any(x <= 0)):
            raise ConfigError("log-transformed data must be positive")
        tx = self._tx(x)
        ty = np.log(y) if self.log_y else y
        if np.ptp(tx) == 0:
            raise ConfigError("abscissa values are all equal")
        res = linregress(tx, ty)
        self.slope_ = float(res.slope)
        self.intercept_ = float(res.intercept)
        self.r2_ = float(res.rvalue**2) if np.ptp(ty) > 0 else 1.0
        self.stderr_ = float(res.stderr)
        self.n_samples_ = int(x.size)
        return self

    def predict(self, x):
        check_is_fitted(self, "slope_")
        z = self.intercept_ + self.slope_ * self._tx(x)
        return np.exp(z) if self.log_y else z

    def score(self, x, y, sample_weight=None):
        """R^2 in the transformed coordinates (the quantity reported as fit quality)."""
        check_is_fitted(self, "slope_")
        y = np.asarray(y, dtype=float).ravel()
        ty = np.log(y) if self.log_y else y
        pred = self.intercept_ + self.slope_ * self._tx(x)
        ss_res = np.sum((ty - pred) ** 2)
        ss_tot = np.sum((ty - ty.mean()) ** 2)
        return float(1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0

    def summary(self) -> dict:
        check_is_fitted(self, "slope_")
        return {"slope": self.slope_, "intercept": self.intercept_, "r2": self.r2_,
                "n": self.n_samples_}


class PowerLawFit(LogLinearFit):
    """``y ~ A x^p``; the exponent is ``slope_``."""

    def __init__(self, min_points: int = 2):
        super().__init__(log_x=True, log_y=True, min_points=min_points)

    @property
    def exponent_(self) -> float:
        check_is_fitted(self, "slope_")
        return self.slope_


class ExponentialFit(LogLinearFit):
    """``y ~ A exp(-nu x)``; the decay rate is ``rate_ = -slope_``."""

    def __init__(self, min_points: int = 2):
        super().__init__(log_x=False, log_y=True, min_points=min_points)

    @property
    def rate_(self) -> float:
        check_is_fitted(self, "slope_")
        return -self.slope_


class LinearFit(LogLinearFit):
    """Plain least-squares line."""

    def __init__(self, min_points: int = 2):
        super().__init__(log_x=False, log_y=False, min_points=min_points)
