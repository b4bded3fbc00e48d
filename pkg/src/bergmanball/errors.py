"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain (point not in the ball, r >= 1, ...)."""


class QuadratureError(RuntimeError):
    """A quadrature rule hit a non-integrable singularity or failed to converge."""


class FDFailure(RuntimeError):
    """A finite-difference Hessian failed its positivity sanity check after retries."""


class WeightError(ValueError):
    """The weight violates the standing hypothesis (indefinite complex Hessian)."""


class IntegrabilityError(ValueError):
    """The weighted space has no square-integrable elements (beta <= n)."""


class FlatnessViolation(RuntimeError):
    """The hypersurface is not a graph over its tangent plane at the probed scale."""


class CoverageError(RuntimeError):
    """A hypersurface sample does not cover the region an integral needs."""


class SweepError(RuntimeError):
    """Too many grid cells failed inside a density sweep."""


class ConfigError(ValueError):
    """Invalid run configuration (unknown keys, inconsistent values)."""
