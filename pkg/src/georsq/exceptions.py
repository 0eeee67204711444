"""Exception types shared across the package."""


class GeorsqError(Exception):
    """Base class for all package-specific errors."""


class DomainError(GeorsqError, ValueError):
    """A mean value or variation endpoint lies outside the family's domain."""


class QuadratureError(GeorsqError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class ConvergenceError(GeorsqError, RuntimeError):
    """An iterative fit failed to converge within its iteration budget."""


class IllConditionedError(GeorsqError, RuntimeError):
    """A matrix factorization failed even after the jitter escalation policy."""


class SamplerDiagnosticError(GeorsqError, RuntimeError):
    """Posterior sampler diagnostics fall outside acceptable ranges."""


class UndefinedR2Error(GeorsqError, ValueError):
    """The baseline variation is zero, so the coefficient is undefined."""


class SchemaError(GeorsqError, ValueError):
    """Input data violates the CSV/JSON schema or dataset invariants."""
