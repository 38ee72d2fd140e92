"""Exception types shared across the package."""


class CelabError(Exception):
    """Base class for all celab errors."""


class InvalidArgumentError(CelabError, ValueError):
    """An argument violates a documented precondition."""


class GenerationFailureError(CelabError):
    """Random generation could not satisfy a constraint after retries."""


class NumericalFailureError(CelabError):
    """A linear-algebra operation failed (singular or ill-conditioned system)."""


class TrainingDivergenceError(CelabError):
    """Training produced a non-finite loss."""


class ResourceLimitError(CelabError):
    """A configured resource cap (e.g. shift-grid size) was exceeded."""


class DegenerateRatioError(CelabError):
    """A classifier output contained a zero probability, making a ratio undefined."""


class ConfigError(CelabError):
    """An experiment config file is malformed or out of range."""
