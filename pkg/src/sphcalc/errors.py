"""Exception types."""


class SphcError(Exception):
    """Base class for library errors."""


class InvalidDimensionError(SphcError, ValueError):
    pass


class DomainError(SphcError, ValueError):
    pass


class ResolutionError(SphcError, ValueError):
    pass


class NumericalError(SphcError, RuntimeError):
    pass


class TruncationError(SphcError, ValueError):
    pass


class CalibrationError(SphcError, RuntimeError):
    pass


class InvalidMeasureError(SphcError, ValueError):
    pass


class ConditioningError(SphcError, RuntimeError):
    pass


class SmoothnessError(SphcError, ValueError):
    pass
