"""Decoherence, einselection and quantum Darwinism toolkit."""
from .errors import ConfigError, EinselectError, NumericalError, StateError, UndefinedConditionalError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EinselectError",
    "NumericalError",
    "StateError",
    "UndefinedConditionalError",
    "__version__",
]
