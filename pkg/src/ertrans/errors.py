"""Exception types shared across the package."""


class ErtransError(Exception):
    """Base class for all package-specific errors."""


class InvalidDimensionError(ErtransError, ValueError):
    """Operator/state shape or mode-space mismatch."""


class InvalidParameterError(ErtransError, ValueError):
    """Out-of-range or inconsistent physical parameter."""


class InvalidOperatorError(ErtransError, ValueError):
    """Operator fails a structural requirement (e.g. not Hermitian)."""


class IntegrationDivergedError(ErtransError, RuntimeError):
    """Time integration left the physical manifold (trace blew up)."""


class DegenerateModesError(ErtransError, ValueError):
    """Eigenmode decomposition requested with all couplings zero."""


class InvalidPairError(ErtransError, ValueError):
    """A transition was requested between a level and itself."""


class DegenerateTransitionError(ErtransError, ValueError):
    """Sensitivity analysis requested for a degenerate level pair."""


class UndefinedFidelityError(ErtransError, ValueError):
    """SNR fidelity is undefined (zero signal and zero noise)."""


class ConfigError(ErtransError, ValueError):
    """Configuration file is malformed or contains unknown keys."""
