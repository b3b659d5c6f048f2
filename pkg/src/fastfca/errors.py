"""Exception types shared across the toolkit."""


class FastFcaError(Exception):
    """Base class for all toolkit errors."""


class NonHermitianError(FastFcaError, ValueError):
    """Input matrix violates Hermitian symmetry beyond tolerance."""


class DefinitenessError(FastFcaError, ValueError):
    """Matrix required to be positive definite is not.

    Carries the offending minimum eigenvalue in ``min_eigenvalue``.
    """

    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SingularMatrixError(FastFcaError, ValueError):
    """Linear system is singular (or too ill-conditioned to solve reliably)."""


class SingularMixtureError(SingularMatrixError):
    """Mixture covariance at a specific time-frequency point is singular.

    ``frame`` and ``bin`` name the offending (n, f) point.
    """

    def __init__(self, frame, bin):
        super().__init__(
            f"mixture covariance is singular at frame={frame}, bin={bin}"
        )
        self.frame = frame
        self.bin = bin


class ConfigurationError(FastFcaError, ValueError):
    """Invalid analysis/synthesis or run configuration."""


class MetricError(FastFcaError, ValueError):
    """Metric is undefined for the given inputs (e.g. silent reference)."""


class PipelineError(FastFcaError, RuntimeError):
    """Non-finite values appeared in the processing pipeline.

    ``stage`` names the pipeline stage that produced them.
    """

    def __init__(self, stage, message=None):
        super().__init__(message or f"non-finite values produced by stage '{stage}'")
        self.stage = stage
