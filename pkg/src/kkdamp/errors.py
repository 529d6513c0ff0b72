"""Exception types shared across the package."""


class KKDampError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(KKDampError, ValueError):
    """Invalid configuration value (bad family parameter, cfl out of range, ...)."""


class ValidationError(KKDampError, ValueError):
    """Semantically invalid input; carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class OutOfRange(KKDampError):
    """State radius exceeds the working range r_max of the velocity model."""


class DegenerateState(KKDampError):
    """Eigenstructure requested at r = 0 where the two fields coincide."""


class AxisState(KKDampError):
    """Riemann invariant Z = u/v requested where v vanishes."""


class QuadratureFailure(KKDampError):
    """Cumulative integral failed its spot checks at the maximum refinement."""


class NonLipschitz(KKDampError):
    """Entropy candidate with unbounded r*eta'(r) near r = 0."""


class CFLViolation(KKDampError):
    """Requested hyperbolic step exceeds the stable step size."""


class StabilityViolation(KKDampError):
    """Requested viscous step exceeds the explicit diffusion limit."""


class NonFinite(KKDampError):
    """NaN or Inf encountered in a state field."""


class ShockFormed(KKDampError):
    """Characteristics crossed; the smooth-solution oracle is no longer valid."""


class RootBracketFailure(KKDampError):
    """Characteristic foot point could not be bracketed for a target location."""


class InsufficientData(KKDampError):
    """Too few usable samples for a fit (decay rate needs at least five times)."""


class TestFunctionSupport(KKDampError):
    """Space-time test function support touches the domain boundary."""

    __test__ = False  # starts with "Test" but is not a pytest class


class ParseError(KKDampError, ValueError):
    """Scenario text could not be parsed; carries line and column (1-based)."""

    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")
