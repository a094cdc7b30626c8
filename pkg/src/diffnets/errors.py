"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Channel count or signal length mismatch."""


class ConfigurationError(ValueError):
    """Inconsistent network, scheme or run configuration."""


class UnsupportedKindError(ValueError):
    """Operation not defined for the requested flux kind."""


class NumericalError(ArithmeticError):
    """NaN/inf produced, iteration diverged or failed to converge."""


class SolverError(NumericalError):
    """Breakdown inside an iterative linear or nonlinear solver."""


class FormatError(ValueError):
    """Unreadable or malformed input file."""
