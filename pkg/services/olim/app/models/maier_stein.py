"""
Maier-Stein field with a constant rotated/scaled diffusion matrix.
"""

import numpy as np

from ..grid_core import Domain
from .base import AttractorSpec, Model, build_rotation_scaled_sigma


class MaierSteinModel(Model):
    name = "maier_stein"
    constant_diffusion = True
    rate_applicable = False
    rate_note = ("the quasi-potential of the Maier-Stein field is non-differentiable at the "
                 "saddle (0,0), so the sharp exit-time formula is not applicable")
    default_boundary_policy = "ComputeWholeDomain"

    def __init__(self, alpha: float = 0.0, gamma: float = 2.0):
        super().__init__()
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.sigma = build_rotation_scaled_sigma(self.alpha, self.gamma, similarity=True)
        self.default_domain = Domain(xmin=-2, xmax=2, ymin=-2, ymax=2)
        self.attractor = AttractorSpec.stable_point((-1.0, 0.0))
        self.known_saddles = (np.array([0.0, 0.0]),)

    def drift_field(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        return X - X ** 3 - 10.0 * X * Y * Y, -(1.0 + X * X) * Y

    def sigma_field(self, X, Y):
        ones = np.ones_like(np.asarray(X, dtype=float))
        s = self.sigma
        return s[0, 0] * ones, s[0, 1] * ones, s[1, 0] * ones, s[1, 1] * ones

    def jacobian(self, x):
        x1, x2 = float(x[0]), float(x[1])
        return np.array([
            [1.0 - 3.0 * x1 * x1 - 10.0 * x2 * x2, -20.0 * x1 * x2],
            [-2.0 * x1 * x2, -(1.0 + x1 * x1)],
        ])

    def divergence_data(self, x):
        return float(np.trace(self.jacobian(x))), np.zeros(2)

    def describe(self) -> dict:
        info = super().describe()
        info.update(alpha=self.alpha, gamma=self.gamma)
        return info


def maier_stein_model(alpha: float = 0.0, gamma: float = 2.0) -> MaierSteinModel:
    return MaierSteinModel(alpha=alpha, gamma=gamma)
