"""Exception types raised across the package."""


class GluedGamesError(ValueError):
    """Base class for invalid input or failed preconditions."""


class InvariantError(GluedGamesError):
    """A value violates a structural invariant (not an observable, not unit, ...)."""


class PreconditionError(GluedGamesError):
    """An operation was called on input that does not meet its hypothesis."""


class ProofStepError(GluedGamesError):
    """A step of a decomposition pipeline produced a residual above tolerance."""

    def __init__(self, step, residual, tol):
        self.step = step
        self.residual = residual
        self.tol = tol
        super().__init__(f"proof step {step!r}: residual {residual:.3e} > tol {tol:.1e}")
