"""Shared exception types."""


class ValidationError(ValueError):
    """Input data violates a precondition (shape, symmetry, positivity...)."""


class CatalogError(ValidationError):
    """Unknown geometry class id or bad class parameter."""


class UnsupportedClassError(ValidationError):
    """Operation is not defined for this geometry class."""


class NumericalError(RuntimeError):
    """A numerical run failed (blow-up, degenerate metric, no convergence)."""


class ConfigurationError(ValidationError):
    """Bad run configuration (unknown key, out-of-range value)."""
