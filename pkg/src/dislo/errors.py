"""Exception hierarchy shared across the package."""


class DisloError(Exception):
    """Base class for all package errors."""


class DomainError(DisloError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(DisloError, ValueError):
    """A discretisation or run parameter is inconsistent or unresolvable."""


class ProfileError(DisloError, ValueError):
    """An angular profile violates symmetry, evenness or ellipticity."""


class DirectionUndefinedError(DisloError, ArithmeticError):
    """A mollified field vanishes everywhere, so no direction can be read off."""


class MissingProfileError(DisloError, FileNotFoundError):
    """A profile file named in a run configuration does not exist."""
