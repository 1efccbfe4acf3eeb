"""Exception hierarchy shared by all modules."""


class CalabiFlowError(Exception):
    """Base class for errors raised by this package."""


class PshViolation(CalabiFlowError, ValueError):
    """A potential fails the discrete positivity condition 1 + D2 u >= -psi_tol."""


class ConvexityViolation(CalabiFlowError, ValueError):
    """A symplectic potential is not discretely convex."""


class MassMismatch(CalabiFlowError, ValueError):
    """A density does not have unit mass."""


class DegenerateMetric(CalabiFlowError, ValueError):
    """The Monge-Ampere density drops below the floor needed for curvature."""


class NoConvergence(CalabiFlowError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PreconditionViolated(CalabiFlowError, ValueError):
    """Inputs do not satisfy the stated precondition of an operation."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class Unbounded(CalabiFlowError, ValueError):
    """A sequence is not bounded in the relevant metric."""


class Inconclusive(CalabiFlowError, RuntimeError):
    """A classification could not be decided from the available data."""


class NotDiverging(CalabiFlowError, ValueError):
    """Ray extraction was requested on a trajectory that does not diverge."""


class Blowup(CalabiFlowError, FloatingPointError):
    """An explicit integrator left the admissible set."""
