"""Exception types shared across the package."""


class CoherentFlowError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CoherentFlowError):
    """Invalid or inconsistent run configuration."""


class IntegrationError(CoherentFlowError):
    """Trajectory integration failed (step underflow, solver breakdown)."""


class OperatorError(CoherentFlowError):
    """Operator assembly or factorization failed."""


class ComplexSpectrumError(OperatorError):
    """Retained eigenvalues have imaginary parts beyond tolerance.

    Usually signals a poor regularization or kernel choice for the data.
    """


class IngestError(CoherentFlowError):
    """Trajectory file could not be parsed into tracks."""
