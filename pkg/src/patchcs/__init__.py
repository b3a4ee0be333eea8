"""Patch-based compressed-sensing capture and residual-CNN restoration."""

from .errors import ConfigurationError, FormatError, NumericalError, PatchCSError, UsageError

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "FormatError",
    "NumericalError",
    "PatchCSError",
    "UsageError",
    "__version__",
]
