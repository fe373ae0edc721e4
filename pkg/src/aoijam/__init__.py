"""Age-of-information scheduling against a power-constrained jammer."""

from .errors import (
    AoiError,
    DivergentError,
    InfeasibleError,
    NoneAboveError,
    StructureError,
    TopologyError,
    ValidationError,
)
from .model import Config, StationaryProfile, validate

__version__ = "0.1.0"

__all__ = [
    "AoiError",
    "Config",
    "DivergentError",
    "InfeasibleError",
    "NoneAboveError",
    "StationaryProfile",
    "StructureError",
    "TopologyError",
    "ValidationError",
    "validate",
    "__version__",
]
