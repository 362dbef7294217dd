"""Spherical pseudodifferential calculus on real hyperbolic space H^d."""

from .errors import (
    ConditioningError,
    DomainError,
    InvalidMeasureError,
    NumericalError,
    ResolutionError,
    SmoothnessError,
    SphcError,
)
from .space_model import RadialFunction, RadialGrid, SpaceModel, SpectralFunction, SpectralGrid, make_space
from .spherical_transform import calibrated_space, forward, inverse

__version__ = "0.1.0"
