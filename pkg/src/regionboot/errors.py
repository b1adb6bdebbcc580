"""Exception and warning types shared across the package."""


class RegionbootError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(RegionbootError):
    """Point dimension does not match the region's ambient dimension."""


class UnsupportedOracleError(RegionbootError):
    """The requested closed-form probability is not available for this region."""


class InvalidParameterError(RegionbootError):
    """Model parameters violate a constraint (pole, ordering, or bound)."""


class NoExactExtrapolationError(RegionbootError):
    """The psi family has no finite value at sigma^2 = -1; use the Taylor route."""


class NumericalError(RegionbootError):
    """A root finder or optimizer failed to converge; carries diagnostics."""


class SelectionError(RegionbootError):
    """Every candidate model failed to fit."""


class ConfigError(RegionbootError):
    """Invalid CLI or sweep configuration."""


class CorrelationClampWarning(UserWarning):
    """A correlation outside (-1, 1) was clamped to the working range."""
