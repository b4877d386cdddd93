"""Exception hierarchy shared by every srnf_lab module."""


class SrnfLabError(Exception):
    """Base class for all library errors."""


class InvalidParam(SrnfLabError, ValueError):
    pass


class DegenerateImmersion(SrnfLabError, ValueError):
    """Tangent vectors are (numerically) parallel at some sample."""

    def __init__(self, message, patch=None, index=None):
        super().__init__(message)
        self.patch = patch
        self.index = index


class GridMismatch(SrnfLabError, ValueError):
    pass


class OutOfDomain(SrnfLabError, ValueError):
    pass


class NotARotation(SrnfLabError, ValueError):
    pass


class InsufficientSamples(SrnfLabError, ValueError):
    pass


class NotClosed(SrnfLabError, ValueError):
    pass


class NotConvex(SrnfLabError, ValueError):
    pass


class Overlap(SrnfLabError, ValueError):
    pass


class ProfileInvalid(SrnfLabError, ValueError):
    pass


class SpecInvalid(SrnfLabError, ValueError):
    pass


class MoserError(SrnfLabError, RuntimeError):
    """Failure inside the area-preserving map pipeline.

    ``stage`` names the pipeline step that raised, when known.
    """

    stage = None


class RoutingFailed(MoserError):
    pass


class NonPositiveJacobian(MoserError):
    pass


class IncompatibleData(MoserError):
    pass


class SolverFailure(MoserError):
    pass


class DegenerateInterpolation(MoserError):
    pass


class StepUnstable(MoserError):
    pass
