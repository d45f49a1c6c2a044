"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class FormatError(ValueError):
    """Malformed input file or sample sequence."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class AccuracyError(ArithmeticError):
    """Quadrature could not reach the requested tolerance."""

    def __init__(self, message, bound):
        super().__init__(f"{message} (achieved error bound {bound:.3e})")
        self.bound = bound


class DivergenceError(ArithmeticError):
    """A time stepper produced a non-finite value at node (j, k)."""

    def __init__(self, j, k):
        super().__init__(f"non-finite value at interval {j}, step {k}")
        self.j = j
        self.k = k


class SolverError(ArithmeticError):
    """Implicit step failed to converge."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual
