"""Exception hierarchy shared by every module."""


class NegdefError(Exception):
    """Base class for all library errors."""


class InvalidGenerator(NegdefError):
    pass


class EmptySpec(NegdefError):
    pass


class ShapeError(NegdefError):
    pass


class BudgetExceeded(NegdefError):
    def __init__(self, message, radius_reached):
        super().__init__(message)
        self.radius_reached = radius_reached


class CacheMismatch(NegdefError):
    pass


class CacheCorrupt(NegdefError):
    pass


class FitWindowError(NegdefError):
    pass


class HorizonError(NegdefError):
    """Raised when a computation needs a larger ball table.

    ``required_radius`` is the smallest table radius that would make the
    request answerable.
    """

    def __init__(self, message, required_radius):
        super().__init__(f"{message}; increase R to {required_radius}")
        self.required_radius = required_radius


class TargetTooTight(NegdefError):
    pass


class EmptyCombination(NegdefError):
    pass


class NotSymmetric(NegdefError):
    pass


class InsufficientCertifiedPoints(NegdefError):
    pass


class DomainError(NegdefError):
    pass


class ConfigError(NegdefError):
    pass
