"""Exception hierarchy shared by all modules.

Every error raised on purpose by the library derives from
:class:`WavetrapError`, so the CLI can map it to a compute-error exit code.
"""


class WavetrapError(Exception):
    """Base class for library errors."""


class ConfigError(WavetrapError, ValueError):
    """Invalid configuration or input value."""


class ConvergenceError(WavetrapError, RuntimeError):
    """An iterative solver did not reach its tolerance.

    The last residual is kept on the instance so callers can report it.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class DomainError(WavetrapError, ValueError):
    """Query lies outside the domain of definition of the requested object."""


class TangencyError(WavetrapError, RuntimeError):
    """Grazing contact with an obstacle; no reflection is defined."""


class FocalPointError(WavetrapError, RuntimeError):
    """Wavefront curvature blew up along free flight."""


class ResolutionError(WavetrapError, RuntimeError):
    """A numerical step or grid is below the resolution it needs."""


class NumericalInconsistencyError(WavetrapError, RuntimeError):
    """Two independent evaluations of the same quantity disagree."""
