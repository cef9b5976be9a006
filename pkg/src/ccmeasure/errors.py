class DomainError(ValueError):
    """Input outside the domain an operation is defined on."""


class NumericError(ArithmeticError):
    """Non-finite values produced during evaluation."""


class DegenerateSupportError(RuntimeError):
    """Box-conditioned mixture sampling accepts almost nothing."""

    def __init__(self, acceptance_rate, message=None):
        self.acceptance_rate = acceptance_rate
        super().__init__(message or f"acceptance rate {acceptance_rate:.2e} below 1e-3")


class GmmSolveError(RuntimeError):
    """No restart of the mixture solver reached the feasibility tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
