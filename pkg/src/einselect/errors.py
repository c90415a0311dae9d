"""Exception types shared across the package."""


class EinselectError(Exception):
    """Base class for all package errors."""


class StateError(EinselectError, ValueError):
    """An input state violates its structural invariants."""


class UndefinedConditionalError(EinselectError, ValueError):
    """Conditioning on an outcome with vanishing probability."""


class ConfigError(EinselectError, ValueError):
    """Invalid scenario configuration or parameter."""


class NumericalError(EinselectError, RuntimeError):
    """A numerical integration left its validity regime."""
