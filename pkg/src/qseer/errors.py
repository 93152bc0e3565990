"""Exception hierarchy shared across the package."""


class QseerError(Exception):
    """Base class for all package-specific errors."""


class BoundsError(QseerError):
    """Input exceeds a supported size cap (qubit count, enumeration size)."""


class ParameterError(QseerError):
    """Invalid argument combination (bad ratios, impossible degree sequence)."""


class GenerationError(QseerError):
    """Random generation failed to satisfy constraints within the retry budget."""


class DomainError(QseerError):
    """Value outside the mathematical domain of an operation."""


class FormatError(QseerError):
    """Corrupt, truncated, or version-incompatible serialized data."""


class UnavailableError(QseerError):
    """Requested data does not exist for the given input (e.g. labels for an unseen graph)."""
