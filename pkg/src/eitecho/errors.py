"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A physical object violates its invariants (non-Hermitian state, negative rate, ...)."""


class ConfigurationError(ValueError):
    """A run configuration is invalid.

    Carries the full list of problems so a bad config is reported in one shot
    instead of one error per run attempt.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InconsistentDataError(ValueError):
    """Measured data cannot correspond to any physical state."""


class FitFailureError(RuntimeError):
    """Nonlinear fit did not converge or the data are degenerate."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
