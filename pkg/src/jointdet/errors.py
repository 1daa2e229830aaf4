"""Exception hierarchy shared by all jointdet modules."""


class JointDetError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(JointDetError, ValueError):
    """Argument has the wrong shape, range, or lies outside the sample space."""


class UndefinedStatisticError(JointDetError, ArithmeticError):
    """Test statistic is 0/0 at the requested point."""


class UndefinedEstimatorError(JointDetError, ArithmeticError):
    """Posterior is degenerate (zero marginal) so the estimator is undefined."""


class NumericalDomainError(JointDetError, ArithmeticError):
    """An objective produced a non-finite value at a probe point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class PreconditionViolation(JointDetError, ValueError):
    """Inputs do not satisfy the structural assumption an operation relies on."""


class InfeasibleError(JointDetError):
    """The constrained problem has no feasible rule at the requested level."""


class InstanceTooLargeError(JointDetError):
    """Exhaustive enumeration guard exceeded."""
