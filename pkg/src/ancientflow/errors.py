class DomainError(ValueError):
    """Argument outside the domain where a formula is defined."""


class ImmersionError(RuntimeError):
    """The discretized geometry stopped being a valid immersion."""


class StabilityError(RuntimeError):
    """Requested time step exceeds the explicit stability bound."""


class ConfigError(ValueError):
    """Invalid run configuration."""


class InsufficientDataError(ValueError):
    """Too few states or records for the requested estimate."""
