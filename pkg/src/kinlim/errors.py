"""Exception taxonomy shared by all kinlim modules."""


class KinlimError(Exception):
    """Base class for all errors raised by kinlim."""


class ParameterError(KinlimError, ValueError):
    """A scalar argument or model parameter violates its admissible range."""


class ShapeError(KinlimError, ValueError):
    """Fields or arrays do not live on compatible grids."""


class ConsistencyError(KinlimError, ValueError):
    """Inputs that must agree (e.g. profile mass vs. declared mass) do not."""


class TruncationError(KinlimError, RuntimeError):
    """The compact support of a profile does not fit on the truncated grid."""


class StabilityError(KinlimError, RuntimeError):
    """A time step violates an explicit stability bound."""


class NumericalFailure(KinlimError, RuntimeError):
    """NaN, blow-up, or negativity beyond rounding detected during a run."""


class RunFileError(KinlimError, ValueError):
    """Run-configuration file could not be parsed or validated."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
