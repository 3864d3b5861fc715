"""Exception types shared across the package."""


class OscintError(Exception):
    """Base class for all errors raised by oscint."""


class InvalidParameter(OscintError, ValueError):
    pass


class DomainError(OscintError, ValueError):
    """Argument outside the interval where the phase pair is defined."""


class RangeOverflow(OscintError, OverflowError):
    """A requested quantity is not representable as a finite double."""


class OutOfRange(OscintError, ValueError):
    """Inversion target lies outside the range of the function."""


class AssumptionError(OscintError):
    """A prerequisite assumption check failed or was never run."""


class FitFailed(OscintError):
    pass


class NoSplit(OscintError):
    """The frequency does not produce an interior zero of g''."""
