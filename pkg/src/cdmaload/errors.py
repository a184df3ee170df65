"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its tolerance.

    ``estimate`` and ``error`` carry the best value obtained and its
    achieved error estimate when those are meaningful.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class InfeasibleError(ValueError):
    """A constraint cannot be met at the requested operating point."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoCoexistenceError(ValueError):
    """Phase coexistence is impossible at the requested SNR."""

    def __init__(self, message, threshold=None):
        super().__init__(message)
        self.threshold = threshold
