"""Numerical laboratory for the symmetric Keyfitz-Kranzer system with
linear damping: eigenstructure, radial entropy pairs, invariant regions,
a split finite-volume solver with optional viscosity, and decay/entropy
diagnostics."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AxisState,
    CFLViolation,
    ConfigError,
    DegenerateState,
    InsufficientData,
    KKDampError,
    NonFinite,
    NonLipschitz,
    OutOfRange,
    ParseError,
    QuadratureFailure,
    RootBracketFailure,
    ShockFormed,
    StabilityViolation,
    TestFunctionSupport,
    ValidationError,
)
from .model import Damping, PhiModel, State  # noqa: F401
