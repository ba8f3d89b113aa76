"""
Linear SDE dx = Jx dt + Sigma sqrt(eps) dW with constant anisotropic diffusion.
The quasi-potential is the quadratic form x^T M x.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..grid_core import Domain
from .base import AttractorSpec, Model, build_rotation_scaled_sigma, is_stable

DEFAULT_J = np.array([[-2.0, -10.0], [20.0, -1.0]])


@dataclass
class LinearModelParams:
    J: np.ndarray = field(default_factory=lambda: DEFAULT_J.copy())
    alpha: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float).reshape(2, 2)
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


class LinearModel(Model):
    name = "linear"
    constant_diffusion = True
    rate_applicable = False
    rate_note = "a linear system has a single equilibrium and no saddle to escape through"
    default_boundary_policy = "StopOnBoundary"

    def __init__(self, alpha: float = 0.0, gamma: float = 1.0, J: Optional[Sequence] = None,
                 sigma: Optional[Sequence] = None):
        super().__init__()
        self.params = LinearModelParams(J=DEFAULT_J.copy() if J is None else J, alpha=alpha, gamma=gamma)
        self.J = self.params.J
        if sigma is None:
            self.sigma = build_rotation_scaled_sigma(alpha, gamma)
        else:
            self.sigma = np.asarray(sigma, dtype=float).reshape(2, 2)
        if not is_stable(self.J):
            raise ValueError(f"linear model needs a stable J, eigenvalues {np.linalg.eigvals(self.J)}")
        self.default_domain = Domain(xmin=-1, xmax=1, ymin=-1, ymax=1)
        self.attractor = AttractorSpec.stable_point((0.0, 0.0))
        self._M = None

    @property
    def M(self) -> np.ndarray:
        if self._M is None:
            # deferred: the solver module imports this package
            from ..olim_solver import linear_quasipotential_matrix
            self._M = linear_quasipotential_matrix(self.J, self.sigma).M
        return self._M

    def drift_field(self, X, Y):
        J = self.J
        return J[0, 0] * X + J[0, 1] * Y, J[1, 0] * X + J[1, 1] * Y

    def sigma_field(self, X, Y):
        ones = np.ones_like(np.asarray(X, dtype=float))
        s = self.sigma
        return s[0, 0] * ones, s[0, 1] * ones, s[1, 0] * ones, s[1, 1] * ones

    def jacobian(self, x):
        return self.J.copy()

    def divergence_data(self, x):
        return float(np.trace(self.J)), np.zeros(2)

    @property
    def has_exact_u(self) -> bool:
        return True

    def exact_u_field(self, X, Y):
        M = self.M
        return M[0, 0] * X * X + 2.0 * M[0, 1] * X * Y + M[1, 1] * Y * Y

    def exact_gradient(self, x):
        return 2.0 * self.M @ np.asarray(x, dtype=float)

    def describe(self) -> dict:
        info = super().describe()
        info.update(alpha=self.params.alpha, gamma=self.params.gamma, J=self.J.tolist())
        return info


def linear_model(alpha: float = 0.0, gamma: float = 1.0, **kwargs) -> LinearModel:
    return LinearModel(alpha=alpha, gamma=gamma, **kwargs)


def gradient_test_model() -> LinearModel:
    """b = -x, sigma = I; U = |x|^2"""
    return LinearModel(J=-np.eye(2), sigma=np.eye(2))
