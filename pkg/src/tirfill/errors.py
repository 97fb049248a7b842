"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violated a documented precondition (shape, range, order)."""


class ConfigurationError(RuntimeError):
    """A required component (extractor, weights) is missing or inconsistent."""


class MaskGenerationError(RuntimeError):
    """Stroke-mask synthesis could not land in the requested ratio bucket."""


class TrainingError(RuntimeError):
    """Training aborted (non-finite gradient or loss)."""


class NumericalError(ArithmeticError):
    """A numerical routine left its validity domain (e.g. badly non-PSD covariance)."""
