"""Exception types raised across the pipeline."""


class TwinError(Exception):
    """Base class for all errors raised by tbtwin."""


class InvariantViolation(TwinError):
    """A value failed a physical or structural invariant."""


class NotHermitian(InvariantViolation):
    pass


class HermiticityViolation(InvariantViolation):
    pass


class TraceViolation(InvariantViolation):
    pass


class PositivityViolation(InvariantViolation):
    pass


class UnnormalizedTarget(InvariantViolation):
    pass


class OutOfRange(InvariantViolation):
    pass


class ConfigInvalid(TwinError):
    pass


class NoSyncSeen(TwinError):
    pass


class EmptyCells(TwinError):
    pass


class MissingRun(TwinError):
    pass


class EmptyProjection(TwinError):
    pass


class SingularSystem(TwinError):
    pass


class TimeTagFormatError(TwinError):
    pass
