"""Exception hierarchy shared by all modules."""


class HoromassError(Exception):
    """Base class for every error raised by the package."""


class NonFinite(HoromassError, FloatingPointError):
    """A coordinate transform overflowed; work in log-scaled quantities instead."""


class DomainError(HoromassError, ValueError):
    """A point or surface lies outside the validity domain of a model."""


class ValidationError(HoromassError, ValueError):
    pass


class SingularMetric(HoromassError, ArithmeticError):
    pass


class DegenerateLevelSet(HoromassError, ArithmeticError):
    pass


class UnsupportedSurface(HoromassError, ValueError):
    pass


class SmallnessViolated(HoromassError, ValueError):
    """|h|_b is too large for the first-order decomposition to be meaningful."""


class TailDominates(HoromassError, ArithmeticError):
    pass


class ExtrapolationUnstable(HoromassError, ArithmeticError):
    pass


class InvalidExponent(HoromassError, ValueError):
    pass


class IncompatibleRule(HoromassError, ValueError):
    pass


class ConfigError(HoromassError, ValueError):
    pass
