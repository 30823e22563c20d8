"""Exception hierarchy shared by every module."""


class CxHessError(Exception):
    """Base class for all library errors."""


class DomainError(CxHessError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConeViolationError(DomainError):
    """A spectrum is not in the Garding cone Gamma_m.

    ``index`` is the first k (1-based) with S_k <= 0, or ``m`` when only the
    S_m floor check failed.
    """

    def __init__(self, message, index=None, node=None):
        super().__init__(message)
        self.index = index
        self.node = node


class MetricError(DomainError):
    """The metric is not positive definite or is too badly conditioned."""


class GeometryError(CxHessError, ValueError):
    """A requested region does not fit inside the grid."""


class DiscretizationError(CxHessError):
    """A stencil cannot be resolved at some node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ResourceError(CxHessError):
    """The requested discretization exceeds the configured memory budget."""


class SolverError(CxHessError):
    """Base class for failures inside the nonlinear or linear solvers."""


class ConeTrapError(SolverError):
    """The line search could not keep the iterate inside the cone."""

    def __init__(self, message, node=None, residual_history=None):
        super().__init__(message)
        self.node = node
        self.residual_history = list(residual_history or [])


class NonConvergenceError(SolverError):
    """Iteration cap reached (or stagnation) before the tolerance was met."""

    def __init__(self, message, residual_history=None, t=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
        self.t = t


class AccuracyError(CxHessError):
    """An adaptive quadrature did not reach its tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
