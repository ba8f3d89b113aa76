"""
Model interface: drift b(x), diffusion sigma(x), attractor data and the
numerical helpers (finite-difference Jacobian, Newton refinement) shared by
every concrete model.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..errors import (
    EquilibriumNotFoundError,
    MissingExactSolutionError,
    ModelDomainError,
    SingularDiffusionError,
)
from ..grid_core import Domain

logger = logging.getLogger(__name__)

FD_EPS = np.finfo(float).eps ** (1.0 / 3.0)
SINGULAR_RTOL = 1e-14


class AttractorKind(str, Enum):
    STABLE_POINT = "StablePoint"
    POINT_SET = "PointSet"


@dataclass(frozen=True)
class AttractorSpec:
    kind: AttractorKind
    point: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None

    @classmethod
    def stable_point(cls, x: Sequence[float]) -> "AttractorSpec":
        return cls(kind=AttractorKind.STABLE_POINT, point=np.asarray(x, dtype=float).reshape(2))

    @classmethod
    def point_set(cls, points: np.ndarray) -> "AttractorSpec":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(kind=AttractorKind.POINT_SET, points=pts)

    def describe(self) -> str:
        if self.kind == AttractorKind.STABLE_POINT:
            return f"StablePoint({self.point[0]:.6g}, {self.point[1]:.6g})"
        return f"PointSet({len(self.points)} samples)"


def build_rotation_scaled_sigma(alpha: float, gamma: float, similarity: bool = False) -> np.ndarray:
    """R(alpha) diag(1, gamma) R(alpha)^T, or R diag R^-1 with similarity=True.

    R = [[cos, -sin], [sin, cos]], so eigenvalue 1 has eigenvector (cos alpha, sin alpha)
    and gamma has (-sin alpha, cos alpha).
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    c, s = np.cos(alpha), np.sin(alpha)
    R = np.array([[c, -s], [s, c]])
    D = np.diag([1.0, gamma])
    right = np.linalg.inv(R) if similarity else R.T
    return R @ D @ right


def sigma_to_covariance_inverse(sigma: np.ndarray, x: Sequence[float] = (np.nan, np.nan)) -> np.ndarray:
    """A = (sigma sigma^T)^-1, symmetrized"""
    sigma = np.asarray(sigma, dtype=float)
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    scale = float(np.sum(sigma * sigma))
    if not np.isfinite(det) or abs(det) <= SINGULAR_RTOL * scale:
        raise SingularDiffusionError(x, det)
    D = sigma @ sigma.T
    detD = D[0, 0] * D[1, 1] - D[0, 1] * D[1, 0]
    A = np.array([[D[1, 1], -D[0, 1]], [-D[1, 0], D[0, 0]]]) / detD
    return 0.5 * (A + A.T)


def _fd_column(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, k: int) -> np.ndarray:
    """d f / d x_k, central where both sides are defined, one-sided next to an excluded region"""
    step = FD_EPS * max(1.0, abs(x[k]))
    xp = x.copy()
    xm = x.copy()
    xp[k] += step
    xm[k] -= step
    try:
        fp = np.asarray(f(xp))
    except ModelDomainError:
        fp = None
    try:
        fm = np.asarray(f(xm))
    except ModelDomainError:
        fm = None
    if fp is not None and fm is not None:
        return (fp - fm) / (xp[k] - xm[k])
    if fp is None and fm is None:
        raise ModelDomainError(f"no finite-difference step around {tuple(x)} stays in the model domain")
    f0 = np.asarray(f(x))
    if fp is not None:
        return (fp - f0) / (xp[k] - x[k])
    return (f0 - fm) / (x[k] - xm[k])


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: Sequence[float]) -> np.ndarray:
    """Central-difference Jacobian, step eps^(1/3) * max(1, |x_k|)"""
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((n, n))
    for k in range(n):
        J[:, k] = _fd_column(f, x, k)
    return J


def is_stable(J: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(J).real < 0))


class Model(ABC):
    """Problem definition for dx = b(x) dt + sigma(x) sqrt(eps) dW"""

    name = "model"
    constant_diffusion = False
    rate_applicable = True
    rate_note = ""
    default_boundary_policy = "StopOnBoundary"
    default_N = 512

    def __init__(self):
        self.default_domain: Domain = Domain(xmin=-1, xmax=1, ymin=-1, ymax=1)
        self.attractor: AttractorSpec = AttractorSpec.stable_point((0.0, 0.0))
        self.known_saddles: Tuple[np.ndarray, ...] = ()

    # -- vectorized fields (NaN where the model is undefined) -------------

    @abstractmethod
    def drift_field(self, X: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ...

    @abstractmethod
    def sigma_field(self, X: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Entries (s11, s12, s21, s22)"""
        ...

    def diffusion_tensor_field(self, X, Y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Entries (d11, d12, d22) of D = sigma sigma^T"""
        s11, s12, s21, s22 = self.sigma_field(X, Y)
        d11 = s11 * s11 + s12 * s12
        d12 = s11 * s21 + s12 * s22
        d22 = s21 * s21 + s22 * s22
        return d11, d12, d22

    def covariance_inverse_field(self, X, Y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Entries (a11, a12, a22) of A = D^-1; NaN at singular points"""
        s11, s12, s21, s22 = self.sigma_field(X, Y)
        det_s = s11 * s22 - s12 * s21
        scale = s11 ** 2 + s12 ** 2 + s21 ** 2 + s22 ** 2
        d11, d12, d22 = self.diffusion_tensor_field(X, Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            det = d11 * d22 - d12 * d12
            singular = ~(np.abs(det_s) > SINGULAR_RTOL * scale)
            a11 = np.where(singular, np.nan, d22 / det)
            a12 = np.where(singular, np.nan, -d12 / det)
            a22 = np.where(singular, np.nan, d11 / det)
        return a11, a12, a22

    # -- pointwise queries (raise on undefined input) ----------------------

    def check_point(self, x: Sequence[float]):
        """Hook for models with excluded regions"""
        if not np.all(np.isfinite(x)):
            raise ModelDomainError(f"{self.name}: non-finite query point {tuple(x)}")

    def drift(self, x: Sequence[float]) -> np.ndarray:
        self.check_point(x)
        bx, by = self.drift_field(np.array([x[0]], dtype=float), np.array([x[1]], dtype=float))
        b = np.array([bx[0], by[0]])
        if not np.all(np.isfinite(b)):
            raise ModelDomainError(f"{self.name}: drift undefined at {tuple(x)}")
        return b

    def diffusion(self, x: Sequence[float]) -> np.ndarray:
        self.check_point(x)
        s = self.sigma_field(np.array([x[0]], dtype=float), np.array([x[1]], dtype=float))
        return np.array([[s[0][0], s[1][0]], [s[2][0], s[3][0]]])

    def diffusion_tensor(self, x: Sequence[float]) -> np.ndarray:
        sigma = self.diffusion(x)
        return sigma @ sigma.T

    def covariance_inverse(self, x: Sequence[float]) -> np.ndarray:
        return sigma_to_covariance_inverse(self.diffusion(x), x)

    def jacobian(self, x: Sequence[float]) -> np.ndarray:
        return fd_jacobian(self.drift, x)

    def divergence_data(self, x: Sequence[float]) -> Tuple[float, np.ndarray]:
        """(div b, a) with a_i = sum_j d_j D_ij; D = A^-1"""
        div_b = float(np.trace(self.jacobian(x)))
        x = np.asarray(x, dtype=float)
        a = np.zeros(2)
        for j in range(2):
            a += _fd_column(self.diffusion_tensor, x, j)[:, j]
        return div_b, a

    # -- exact solution (optional) ----------------------------------------

    @property
    def has_exact_u(self) -> bool:
        return False

    def exact_u_field(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        raise MissingExactSolutionError(f"model '{self.name}' has no exact quasi-potential")

    def exact_u(self, x: Sequence[float]) -> float:
        return float(self.exact_u_field(np.array([x[0]], dtype=float), np.array([x[1]], dtype=float))[0])

    def exact_gradient(self, x: Sequence[float]) -> np.ndarray:
        raise MissingExactSolutionError(f"model '{self.name}' has no exact gradient")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "attractor": self.attractor.describe(),
            "constant_diffusion": self.constant_diffusion,
            "domain": list(self.default_domain.as_tuple()),
        }


def covariance_inverse(model: Model, x: Sequence[float]) -> np.ndarray:
    return model.covariance_inverse(x)


def refine_equilibrium(model: Model, seed: Sequence[float], tol: float = 1e-10, max_iter: int = 100) -> np.ndarray:
    """Damped Newton on b(x) = 0 with the model Jacobian"""
    x = np.asarray(seed, dtype=float).copy()
    try:
        b = model.drift(x)
    except ModelDomainError as e:
        raise EquilibriumNotFoundError(f"seed {tuple(seed)} outside model domain: {e}", x)
    res = float(np.linalg.norm(b))
    best, best_res = x.copy(), res

    for it in range(max_iter):
        if res < tol:
            logger.debug(f"{model.name}: equilibrium {x} after {it} Newton steps")
            return x
        try:
            J = model.jacobian(x)
        except ModelDomainError as e:
            raise EquilibriumNotFoundError(f"equilibrium refinement failed, Jacobian undefined at {tuple(x)}: {e}",
                                           best, best_res)
        try:
            step = -np.linalg.solve(J, b)
        except np.linalg.LinAlgError:
            raise EquilibriumNotFoundError("singular Jacobian during Newton refinement", best, best_res)

        t = 1.0
        while t > 1e-6:
            trial = x + t * step
            try:
                b_trial = model.drift(trial)
                res_trial = float(np.linalg.norm(b_trial))
            except ModelDomainError:
                res_trial = np.inf
            if res_trial < res:
                break
            t *= 0.5
        else:
            # no decrease along the Newton direction; at rounding level we are done
            if res < 1e3 * tol:
                return x
            raise EquilibriumNotFoundError("Newton line search stalled", best, best_res)

        x, b, res = trial, b_trial, res_trial
        if res < best_res:
            best, best_res = x.copy(), res

    if best_res < tol:
        return best
    raise EquilibriumNotFoundError(f"no convergence in {max_iter} damped Newton steps", best, best_res)


@dataclass
class ModelInfo:
    """Registry entry"""

    name: str
    factory: Callable[..., Model]
    description: str = ""
    parameters: Tuple[str, ...] = field(default_factory=tuple)
