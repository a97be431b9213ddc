"""Exception types raised across the package."""


class PersuadedSearchError(Exception):
    """Base class for all package errors."""


class DomainError(PersuadedSearchError, ValueError):
    """An argument lies outside the domain of the function."""


class DegenerateConditioningError(PersuadedSearchError, ValueError):
    """Conditioning on an event of zero prior probability."""


class InvalidSignalError(PersuadedSearchError, ValueError):
    pass


class InvalidCostError(PersuadedSearchError, ValueError):
    """Search cost outside the open interval (0, prior mean)."""


class InfeasibleProfileError(PersuadedSearchError, ValueError):
    pass


class RootNotBracketedError(PersuadedSearchError, RuntimeError):
    """A threshold equation has no sign change where one is expected.

    Raised instead of guessing when a prior breaks the regularity pattern
    that threshold computations rely on.
    """


class CapExceededError(PersuadedSearchError, RuntimeError):
    """An episode ran past the period cap."""


class InconsistentCertificatesError(PersuadedSearchError, RuntimeError):
    pass


class NonConvergenceError(PersuadedSearchError, RuntimeError):
    pass


class ConfigError(PersuadedSearchError, ValueError):
    pass
