"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class ConfigError(ValidationError):
    """An experiment configuration field is missing, unknown, or malformed."""


class IntegrationDivergedError(RuntimeError):
    """A time integration drifted outside its accuracy guarantees."""


class QuadratureConvergenceError(RuntimeError):
    """A numerical integral failed to reach the requested tolerance."""
