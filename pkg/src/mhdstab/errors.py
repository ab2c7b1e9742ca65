"""Exception types raised across the package."""


class MHDStabError(Exception):
    """Base class for all package errors."""


class InvalidFieldError(MHDStabError, ValueError):
    """Spectral coefficients are non-finite or have the wrong shape."""


class DegenerateModeError(MHDStabError, ValueError):
    """A multiplier is undefined at k = 0 for a field with nonzero mean."""


class InvalidBackgroundError(MHDStabError, ValueError):
    """The background field n is unusable (zero vector, bad exponent)."""


class PreconditionError(MHDStabError, ValueError):
    """An operation's stated precondition does not hold for its input."""


class VacuumError(MHDStabError):
    """Density (or temperature) dropped below the admissibility threshold."""


class ConfigError(MHDStabError, ValueError):
    """Invalid run configuration. ``path`` names the offending key."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalError(MHDStabError):
    """An eigen-solve or other numerical kernel failed."""


class DomainError(MHDStabError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. log of <= 0)."""


class PreparationError(MHDStabError):
    """Initial data cannot be adjusted to satisfy the conservation constraints."""
