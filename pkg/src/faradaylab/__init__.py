"""Spectral laboratory for the viscous Faraday-wave problem in flattened coordinates."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConditioningError,
    ConfigurationError,
    ContractError,
    FaradayError,
    FlatteningDegenerate,
    NumericalError,
    SingularOperatorError,
    SolvabilityError,
)
from .params import OscillationProfile, Params  # noqa: E402
from .grid import Grid, SurfaceField, VolumeField, make_grid  # noqa: E402
from .state import FlowState  # noqa: E402

__all__ = [
    "ConditioningError",
    "ConfigurationError",
    "ContractError",
    "FaradayError",
    "FlatteningDegenerate",
    "NumericalError",
    "SingularOperatorError",
    "SolvabilityError",
    "OscillationProfile",
    "Params",
    "Grid",
    "SurfaceField",
    "VolumeField",
    "make_grid",
    "FlowState",
]
