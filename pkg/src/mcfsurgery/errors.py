"""Exception hierarchy shared by the solvers and the harness."""


class McfError(Exception):
    """Base class for all package errors."""


class ValidationError(McfError):
    """Bad input data or configuration (CLI exit code 2)."""


class NumericalError(McfError):
    """A run could not be completed numerically (CLI exit code 3)."""


class MalformedProfile(ValidationError):
    pass


class EmptySlice(ValidationError):
    pass


class NotTwoConvex(ValidationError):
    def __init__(self, message, node=None, x=None):
        super().__init__(message)
        self.node = node
        self.x = x


class NotConvex(ValidationError):
    pass


class DomainTooSmall(ValidationError):
    pass


class NonpositiveEpsilon(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class NoTrigger(PreconditionError):
    pass


class WindowOutOfRange(ValidationError):
    pass


class TimeMismatch(ValidationError):
    pass


class EmptyTrack(ValidationError):
    pass


class NotDisjoint(ValidationError):
    pass


class CflViolation(NumericalError):
    pass


class NegativeRadius(NumericalError):
    pass


class CapCurvatureExceeded(NumericalError):
    pass


class SurgeryCapExceeded(NumericalError):
    pass


class Stalled(NumericalError):
    pass


class NotReached(NumericalError):
    pass
