"""Exception types shared across the package."""


class LssError(Exception):
    """Base class for all package-specific errors."""


class ModelFormatError(LssError):
    """Raised when a model file is malformed (bad JSON, ragged arrays,
    non-finite entries, inconsistent shapes)."""


class InfeasibleError(LssError):
    """Raised when a solver cannot produce a certificate or grammian
    within its budget.  This is not a proof of infeasibility."""
