"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument, configuration value or precondition is invalid."""


class StructuralError(ValueError):
    """Shapes, schemas or index ranges do not match."""


class RegimeError(RuntimeError):
    """Operation requested outside the |gamma + 2*lambda| < 1 window."""


class SolverError(RuntimeError):
    """A solver failed in a way that cannot be reported as a result."""


class IntegrationError(RuntimeError):
    """The time integrator failed (step-size underflow, blow-up, ...)."""
