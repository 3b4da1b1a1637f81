"""Exception types raised by the solvers."""


class LiftconError(Exception):
    """Base class for solver failures."""


class AnnulusViolation(LiftconError):
    """Desired acceleration vector leaves the annulus (free-fall instant)."""

    def __init__(self, t, a_norm):
        self.t = float(t)
        self.a_norm = float(a_norm)
        super().__init__(f"annulus assumption violated at t={self.t:.6g} s (|a_d|={self.a_norm:.3g})")


class GridMismatch(LiftconError, ValueError):
    pass


class GainDesignError(LiftconError):
    """Riccati integration blew up while designing the tracking gain."""


class ProjectionDivergence(LiftconError):
    """Closed-loop simulation escaped the configured radius (curve outside dom P)."""

    def __init__(self, t, norm):
        self.t = float(t)
        self.norm = float(norm)
        super().__init__(f"projection diverged at t={self.t:.6g} s (|x|={self.norm:.3g})")


class RiccatiFailure(LiftconError):
    """LQ sweep met a non positive definite input block."""

    def __init__(self, k, msg="input Hessian not positive definite"):
        self.k = int(k)
        super().__init__(f"{msg} at node {k}")


class LineSearchFailure(LiftconError):
    pass


class NonFiniteModel(LiftconError):
    def __init__(self, what, k):
        self.k = int(k)
        super().__init__(f"non-finite {what} at node {k}")


class ContractionError(LiftconError):
    pass


class NewtonFailure(LiftconError):
    """Wraps a stage failure together with the iterate that caused it."""

    def __init__(self, message, iterate=None, report=None):
        super().__init__(message)
        self.iterate = iterate
        self.report = report


class StageFailure(LiftconError):
    def __init__(self, stage, param, value, last_good, cause):
        self.stage = stage
        self.param = param
        self.value = value
        self.last_good = last_good
        self.cause = cause
        super().__init__(f"stage {stage} failed at {param}={value}: {cause}")
