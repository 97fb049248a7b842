"""Three-stage thermal-infrared image inpainting: edge connection,
edge-guided completion, gated-convolution refinement."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    MaskGenerationError,
    NumericalError,
    TrainingError,
    ValidationError,
)

__all__ = [
    "ConfigurationError",
    "MaskGenerationError",
    "NumericalError",
    "TrainingError",
    "ValidationError",
    "__version__",
]
