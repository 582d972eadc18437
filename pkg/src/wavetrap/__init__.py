"""Numerical toolkit for waves trapped between two convex obstacles.

Billiard dynamics and the trapped set, reflected phases and amplitudes,
a wave parametrix with its decay curves, and Morawetz-weight certificates.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, ConvergenceError, DomainError, FocalPointError,  # noqa: E402
                     NumericalInconsistencyError, ResolutionError, TangencyError, WavetrapError)
from .geometry import ConvexBody, Ellipsoid, GaugeWeight, Scene, Sphere  # noqa: E402
from .billiard import PhasePoint, flow, return_map, transfer_monodromy  # noqa: E402
from .trapped import Cylinder, build_cutoff, compute_trapped_set, shrinkage_fit  # noqa: E402
from .phase import PhaseQuery, evaluate_phase  # noqa: E402
from .amplitude import convergence_check, story_census  # noqa: E402
from .parametrix import ParametrixConfig, free_term, reflected_sum  # noqa: E402
from .morawetz import bilaplacian_threshold, log_factor, two_center_analysis  # noqa: E402
from .fitting import ExponentialFit, LinearFit, PowerLawFit  # noqa: E402

__all__ = [
    "__version__", "WavetrapError", "ConfigError", "ConvergenceError", "DomainError",
    "FocalPointError", "NumericalInconsistencyError", "ResolutionError", "TangencyError",
    "ConvexBody", "Ellipsoid", "GaugeWeight", "Scene", "Sphere", "PhasePoint", "flow",
    "return_map", "transfer_monodromy", "Cylinder", "build_cutoff", "compute_trapped_set",
    "shrinkage_fit", "PhaseQuery", "evaluate_phase", "convergence_check", "story_census",
    "ParametrixConfig", "free_term", "reflected_sum", "bilaplacian_threshold", "log_factor",
    "two_center_analysis", "ExponentialFit", "LinearFit", "PowerLawFit",
]
