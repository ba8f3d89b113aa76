"""
Planar field with a stable limit cycle on the unit circle.

b = -1/2 grad U + omega (-x2, x1), U = (|x|^2 - 1)^2, sigma = I. The rotational
part is orthogonal to grad U, so U is the exact quasi-potential with respect to
the cycle.
"""

import numpy as np

from ..grid_core import Domain
from .base import AttractorSpec, Model


class LimitCycleModel(Model):
    name = "limit_cycle"
    constant_diffusion = True
    rate_applicable = False
    rate_note = "the attractor is a cycle, not an equilibrium point"
    default_boundary_policy = "ComputeWholeDomain"
    default_N = 256

    def __init__(self, omega: float = 1.0, n_samples: int = 2048):
        super().__init__()
        self.omega = float(omega)
        theta = np.linspace(0.0, 2.0 * np.pi, int(n_samples), endpoint=False)
        self.default_domain = Domain(xmin=-2, xmax=2, ymin=-2, ymax=2)
        self.attractor = AttractorSpec.point_set(np.column_stack([np.cos(theta), np.sin(theta)]))

    def drift_field(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        radial = -2.0 * (X * X + Y * Y - 1.0)
        return radial * X - self.omega * Y, radial * Y + self.omega * X

    def sigma_field(self, X, Y):
        ones = np.ones_like(np.asarray(X, dtype=float))
        zeros = np.zeros_like(ones)
        return ones, zeros, zeros, ones

    def divergence_data(self, x):
        r2 = float(x[0] ** 2 + x[1] ** 2)
        # div(-2 (r^2 - 1) x) = -8 r^2 + 4
        return -8.0 * r2 + 4.0, np.zeros(2)

    @property
    def has_exact_u(self) -> bool:
        return True

    def exact_u_field(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        return (X * X + Y * Y - 1.0) ** 2

    def exact_gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 4.0 * (x @ x - 1.0) * x

    def describe(self) -> dict:
        info = super().describe()
        info.update(omega=self.omega)
        return info


def limit_cycle_model(omega: float = 1.0, n_samples: int = 2048) -> LimitCycleModel:
    return LimitCycleModel(omega=omega, n_samples=n_samples)
