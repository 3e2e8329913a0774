"""Exception hierarchy.

Invalid input, a valid-but-unstable model and numerical breakdown are kept
distinct because the CLI maps them to different exit codes.
"""


class OptocoolError(Exception):
    pass


class InvalidParameterError(OptocoolError, ValueError):
    """A physical parameter violates its domain (e.g. negative mass)."""


class UnstableModelError(OptocoolError):
    """A steady-state quantity was requested for a model with no steady state."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MarginalStabilityError(UnstableModelError):
    """A pole sits on (or numerically at) the real frequency axis."""


class NumericalFailure(OptocoolError, RuntimeError):
    """An iterative numerical routine did not reach its tolerance.

    ``estimate`` and ``error_bound`` carry whatever the routine achieved.
    """

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class RegimeWarning(UserWarning):
    """A limiting expression is evaluated outside the regime it assumes."""
