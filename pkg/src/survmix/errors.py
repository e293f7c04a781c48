"""Exception types shared across the package."""


class SurvmixError(Exception):
    """Base class for all survmix errors."""


class ShapeError(SurvmixError, ValueError):
    """Array dimensions do not match what an operation expects."""


class DomainError(SurvmixError, ValueError):
    """A numeric argument lies outside the mathematical domain."""


class TrainingError(SurvmixError, RuntimeError):
    """Optimization produced a non-finite quantity or diverged."""


class FormatError(SurvmixError, ValueError):
    """A file does not conform to its declared on-disk format."""


class ConfigError(SurvmixError, ValueError):
    """Invalid configuration value or unknown configuration key."""
