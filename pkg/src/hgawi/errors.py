"""Exception types raised by the simulator."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(ValueError):
    """A configuration file or scenario is malformed or inconsistent."""


class GeometryError(ValueError):
    """No beam arrangement closes the wave-vector triangle."""


class NumericalError(RuntimeError):
    """Base class for numerical failures (CLI exit code 3)."""


class SingularityError(NumericalError):
    pass


class DegenerateSteadyStateError(NumericalError):
    """The Liouvillian has more than one stationary state."""


class SolverError(NumericalError):
    """A steady-state solve failed inside a velocity average."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class FitError(NumericalError):
    """Least-squares fit did not converge; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last
