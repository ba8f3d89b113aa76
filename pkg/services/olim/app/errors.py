"""
Exception hierarchy for the quasi-potential solver
"""

from typing import Optional, Sequence


class QpotError(Exception):
    """Base class for every error raised by the solver package"""

    stage = "solve"


class DomainError(QpotError):
    """Invalid domain box or a point outside of it"""

    stage = "config"


class SingularDiffusionError(QpotError):
    """sigma(x) is (numerically) singular at a queried point"""

    def __init__(self, x: Sequence[float], det: float):
        self.x = tuple(float(v) for v in x)
        self.det = det
        super().__init__(f"Singular diffusion matrix at x={self.x} (det sigma = {det:.3e})")


class NonPositiveDefiniteError(QpotError):
    """Quadratic form of a matrix that should be SPD came out negative"""


class ModelDomainError(QpotError):
    """Model queried where it is undefined"""


class HeapError(QpotError):
    """Misuse of the indexed min-heap"""


class RootBracketError(QpotError):
    """Root solver called on an interval without a sign change"""


class DerivativeUndefinedError(QpotError):
    """Triangle derivative has a vanishing denominator"""


class InitializationError(QpotError):
    """The solver could not be seeded"""


class ConsistencyError(QpotError):
    """An internal identity check failed"""


class EquilibriumNotFoundError(QpotError):
    """Newton iteration for b(x) = 0 did not converge"""

    def __init__(self, message: str, best: Optional[Sequence[float]] = None, residual: float = float("nan")):
        self.best = None if best is None else tuple(float(v) for v in best)
        self.residual = residual
        super().__init__(f"{message} (best iterate {self.best}, |b| = {residual:.3e})")


class NotASaddleError(QpotError):
    """Equilibrium has no positive Jacobian eigenvalue"""

    stage = "rate"


class DegenerateHessianError(QpotError):
    """Hessian of U is not usable in the rate formula"""

    stage = "rate"


class StencilError(QpotError):
    """Finite-difference stencil reaches nodes with no computed value"""

    stage = "postproc"


class PathTracingError(QpotError):
    """A MAP could not be started"""

    stage = "map"


class MissingExactSolutionError(QpotError):
    """Error metrics requested for a model without an exact solution"""

    stage = "postproc"


class FieldFormatError(QpotError):
    """Malformed field file"""

    stage = "io"


class ConfigError(QpotError):
    """Invalid run configuration"""

    stage = "config"


class RateNotApplicableError(QpotError):
    """The sharp rate formula does not apply to this model"""

    stage = "rate"
