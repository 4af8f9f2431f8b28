"""Exception types shared across hetlab."""


class ConfigurationError(ValueError):
    """Invalid parameters or settings; the message names the violated constraint."""


class NumericDomainError(ValueError):
    """An input outside the mathematical domain of an operation (non-finite, x <= 0, ...)."""


class UnsupportedDensityError(TypeError):
    """Raised when a density is requested for a law without one (rademacher)."""


class DivergenceError(RuntimeError):
    """A simulated path left the representable range and the requested output cannot be produced."""
