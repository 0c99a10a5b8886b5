"""Numerical companion for pinched ancient mean curvature flows in space forms."""

from .errors import ConfigError, DomainError, ImmersionError, InsufficientDataError, StabilityError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "ImmersionError",
    "InsufficientDataError",
    "StabilityError",
    "__version__",
]
