"""
Nonlinear test SDE with variable anisotropic diffusion.

sigma(x) is the Jacobian of the polar-to-Cartesian change of variables, so in
(r, phi) the noise is isotropic and the drift splits into a potential and a
rotational part. The exact quasi-potential is

    U = r^2 (r^2/18 - 1) + 9/2 + 2 (1 - x1/r)

with respect to the stable equilibrium (3, 0). Undefined at the origin.
"""

import numpy as np

from ..errors import ModelDomainError
from ..grid_core import Domain
from .base import AttractorSpec, Model

R_MIN = 1e-8


class PolarTestModel(Model):
    name = "polar"
    default_boundary_policy = "StopOnBoundary"

    def __init__(self):
        super().__init__()
        self.default_domain = Domain(xmin=-3.8, xmax=4.2, ymin=-4.0, ymax=4.0)
        self.attractor = AttractorSpec.stable_point((3.0, 0.0))
        self.known_saddles = (np.array([-3.0, 0.0]),)

    def check_point(self, x):
        super().check_point(x)
        if np.hypot(x[0], x[1]) < R_MIN:
            raise ModelDomainError(f"polar model is singular at the origin, queried {tuple(x)}")

    @staticmethod
    def _radius(X, Y):
        r = np.hypot(X, Y)
        return np.where(r < R_MIN, np.nan, r)

    def fg_field(self, X, Y):
        r = self._radius(X, Y)
        sin_phi = Y / r
        radial = 1.0 - r * r / 9.0
        f = radial + sin_phi / (r * r)
        g = sin_phi - radial
        return f, g

    def drift_field(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        f, g = self.fg_field(X, Y)
        return Y * g + X * f, -X * g + Y * f

    def sigma_field(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        r = self._radius(X, Y)
        return X / r, -Y, Y / r, X

    def rotational_field(self, X, Y):
        """Rotational component l with b = -1/2 D grad U + l and l . grad U = 0"""
        r = self._radius(X, Y)
        r3 = r ** 3
        c = r * r / 9.0 - 1.0
        return Y * c + X * Y / r3, -X * c + Y * Y / r3

    @property
    def has_exact_u(self) -> bool:
        return True

    def exact_u_field(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        r = self._radius(X, Y)
        r2 = r * r
        return r2 * (r2 / 18.0 - 1.0) + 4.5 + 2.0 * (1.0 - X / r)

    def exact_gradient_field(self, X, Y):
        r = self._radius(X, Y)
        r2 = r * r
        r3 = r2 * r
        radial = 2.0 * r2 / 9.0 - 2.0
        return radial * X - 2.0 * Y * Y / r3, radial * Y + 2.0 * X * Y / r3

    def exact_gradient(self, x):
        self.check_point(x)
        gx, gy = self.exact_gradient_field(np.array([x[0]], dtype=float), np.array([x[1]], dtype=float))
        return np.array([gx[0], gy[0]])


def polar_test_model() -> PolarTestModel:
    return PolarTestModel()
