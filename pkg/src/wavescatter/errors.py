"""Exception types shared across the package (mapped to CLI exit codes)."""


class PreconditionError(ValueError):
    """Input violates a documented precondition (CLI exit code 2)."""


class ConfigurationError(ValueError):
    """Solver or experiment configuration is inconsistent (CLI exit code 2)."""


class NumericalGuardError(RuntimeError):
    """A numerical guard fired, e.g. blow-up or non-convergence (CLI exit code 3)."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TruncationWarning(UserWarning):
    """Data reached the edge of the computational domain."""


class DependencyError(LookupError):
    """A hierarchy member needs a lower-order member that was not computed."""
