"""Exception types shared across the package."""


class CMCSolveError(Exception):
    """Base class for all package errors."""


class ConfigError(CMCSolveError):
    """Invalid run configuration (bad key, value out of range, schema mismatch)."""


class NotOnBoundary(CMCSolveError):
    """Point handed to a boundary operation is not on the zero level set."""


class DegenerateSublevel(CMCSolveError):
    """Requested super-level set is too small to be resolved."""


class RootFindFailure(CMCSolveError):
    """Boundary radius could not be bracketed along a ray from the peak."""


class SpacelikeViolation(CMCSolveError):
    """|Du| reached the Minkowski light-cone guard at some node."""

    def __init__(self, grad_norm: float, node: int | None = None):
        self.grad_norm = float(grad_norm)
        self.node = node
        where = f" at node {node}" if node is not None else ""
        super().__init__(f"spacelike guard violated{where}: |Du| = {grad_norm:.9g}")


class ConvexityLoss(CMCSolveError):
    """Hessian eigenvalue dropped below the uniform convexity guard."""

    def __init__(self, eig_min: float, node: int | None = None):
        self.eig_min = float(eig_min)
        self.node = node
        where = f" at node {node}" if node is not None else ""
        super().__init__(f"convexity guard violated{where}: min eig = {eig_min:.9g}")


class StepRejection(CMCSolveError):
    """Backtracking line search shrank the Newton step below its floor."""


class NonConvergence(CMCSolveError):
    """Newton iteration exhausted its budget.

    Carries the best iterate seen so the caller can inspect or restart.
    """

    def __init__(self, message: str, best_field=None, residual_norm: float | None = None,
                 iterations: int | None = None, t: float | None = None):
        self.best_field = best_field
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.t = t
        super().__init__(message)


class SeedFailure(CMCSolveError):
    """No admissible initial field could be constructed."""


class InversionFailure(CMCSolveError):
    """Gradient-map inversion failed: the target point lies outside the
    numerical gradient image."""

    def __init__(self, gap: float, point=None):
        self.gap = float(gap)
        self.point = point
        super().__init__(f"gradient inversion failed: boundary gap {gap:.3e} at y={point}")


class SingularHessian(CMCSolveError):
    """Dual operator hit a numerically singular Hessian."""
