"""Exception types shared across the package."""


class CovsketchError(Exception):
    """Base class for all covsketch errors."""


class ConfigError(CovsketchError, ValueError):
    """Invalid configuration value (unknown distribution, bad option)."""


class ShapeError(CovsketchError, ValueError):
    """Dimension mismatch between operands."""


class ParameterError(CovsketchError, ValueError):
    """Structurally invalid generator or solver parameter."""


class StructureError(CovsketchError, ValueError):
    """Input matrix does not have the required structure."""


class EmptyInputError(CovsketchError, ValueError):
    """An operation received an empty stream or vector."""


class DegenerateInputError(CovsketchError, ValueError):
    """Numerically degenerate input (e.g. no positive leading eigenvalue)."""


class UndefinedMetricError(CovsketchError, ZeroDivisionError):
    """A relative metric was requested against a zero reference."""


class RankDeficiencyError(CovsketchError, RuntimeError):
    """A Gram system is singular; more measurements or regularization needed."""


class UnsupportedRegimeError(CovsketchError, ValueError):
    """The requested parameter regime is outside what the method covers."""
