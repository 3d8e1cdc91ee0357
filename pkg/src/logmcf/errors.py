"""Exception types shared across the package."""


class DegenerateSurfaceError(ValueError):
    """Profile is not a valid convex surface of revolution."""


class ConvexityLostError(RuntimeError):
    """A principal curvature became nonpositive during a flow step.

    The continuum flow preserves convexity, so this signals a
    discretization failure (refine and retry), never a feature of the
    flow itself.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StepTooSmallError(RuntimeError):
    """Stable time step fell below dt_min.

    Signals that the flow approached the singular time beyond what the
    current resolution can follow.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NonParabolicError(RuntimeError):
    """Graph solver left the regime where the speed argument is positive."""


class InsufficientBlowupError(RuntimeError):
    """Trace does not exhibit enough curvature growth for blowup analysis."""


class SnapshotCoverageError(IndexError):
    """Stored snapshots do not cover the time interval a rescaling needs."""
