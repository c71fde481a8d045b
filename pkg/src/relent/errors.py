"""Exception hierarchy shared across the package."""


class RelentError(Exception):
    """Base class for all library-specific errors."""


class QDomainError(RelentError, ValueError):
    """Input outside the mathematical domain of a q-deformed operation."""


class SpaceMismatchError(RelentError, ValueError):
    """Two objects that must live on the same finite space do not."""


class DegenerateFeatureError(RelentError, ValueError):
    """A constraint feature is constant on the space (singular Jacobian)."""


class InfeasibleTargetError(RelentError, ValueError):
    """Moment targets lie outside the feasible set of the constraint regime."""


class DegenerateSolutionError(RelentError, RuntimeError):
    """The cut-off wiped out the whole support; no density remains."""


class ConvergenceError(RelentError, RuntimeError):
    """A solver hit its iteration budget.

    Carries the last iterate (``result``, a SolveResult with converged=False)
    and per-iteration diagnostics so callers can inspect what happened.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class PreconditionError(RelentError, ValueError):
    """A verification routine was handed inputs violating its hypotheses."""


class EmptyFeasibleSetError(RelentError, ValueError):
    """No grid point satisfies the constraints within the slack band."""


class ConfigError(RelentError, ValueError):
    """A problem configuration failed validation; message names the field."""
