"""
Post-processing of a computed quasi-potential: gradient and Hessian
reconstruction, MAP tracing, HJ residual, field decomposition and error
metrics against exact solutions.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import MissingExactSolutionError, ModelDomainError, NotASaddleError, PathTracingError
from .grid_core import Grid
from .models.base import AttractorKind, Model
from .olim_solver import SolveResult

logger = logging.getLogger(__name__)

FieldLike = Union[np.ndarray, SolveResult]

STALL_NORM = 1e-12


def _as_field(u: FieldLike) -> np.ndarray:
    if isinstance(u, SolveResult):
        return u.u
    return np.asarray(u, dtype=float)


@dataclass
class Path:
    """Polyline with cumulative arc length"""

    vertices: np.ndarray
    arclength: np.ndarray = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(pts) > 1:
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            keep = np.concatenate([[True], seg > 0])
            pts = pts[keep]
        self.vertices = pts
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        self.arclength = np.concatenate([[0.0], np.cumsum(seg)])

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    def reversed(self) -> "Path":
        return Path(self.vertices[::-1].copy())

    def appended(self, point: Sequence[float]) -> "Path":
        return Path(np.vstack([self.vertices, np.asarray(point, dtype=float).reshape(1, 2)]))


@dataclass
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    valid: np.ndarray


def _axis_derivative(u: np.ndarray, step: float, axis: int) -> np.ndarray:
    """Central differences, second-order one-sided next to non-finite values"""
    pad = [(0, 0), (0, 0)]
    pad[axis] = (2, 2)
    up = np.pad(u, pad, constant_values=np.inf)
    n = u.shape[axis]

    def take(offset):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(2 + offset, 2 + offset + n)
        return up[tuple(sl)]

    c, p1, p2, m1, m2 = take(0), take(1), take(2), take(-1), take(-2)
    fc, fp1, fp2, fm1, fm2 = (np.isfinite(a) for a in (c, p1, p2, m1, m2))
    out = np.full(u.shape, np.nan)
    with np.errstate(invalid="ignore", over="ignore"):
        central = fc & fp1 & fm1
        out = np.where(central, (p1 - m1) / (2 * step), out)
        fwd2 = ~central & fc & fp1 & fp2
        out = np.where(fwd2, (-3 * c + 4 * p1 - p2) / (2 * step), out)
        bwd2 = ~central & ~fwd2 & fc & fm1 & fm2
        out = np.where(bwd2, (3 * c - 4 * m1 + m2) / (2 * step), out)
        fwd1 = ~central & ~fwd2 & ~bwd2 & fc & fp1
        out = np.where(fwd1, (p1 - c) / step, out)
        bwd1 = ~central & ~fwd2 & ~bwd2 & ~fwd1 & fc & fm1
        out = np.where(bwd1, (c - m1) / step, out)
    return out


def gradient_field(u: FieldLike, grid: Grid) -> GradientField:
    """Mesh gradient of u; nodes without a usable stencil are invalid (NaN)"""
    u = _as_field(u)
    gx = _axis_derivative(u, grid.h1, axis=1)
    gy = _axis_derivative(u, grid.h2, axis=0)
    valid = np.isfinite(gx) & np.isfinite(gy)
    return GradientField(gx=np.where(valid, gx, np.nan), gy=np.where(valid, gy, np.nan), valid=valid)


def hessian_field(u: FieldLike, grid: Grid, m: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Uxx, Uxy, Uyy) from the 9-point stencil with spacing m*h; NaN off the finite region"""
    u = _as_field(u)
    ny, nx = u.shape
    up = np.pad(u, m, constant_values=np.inf)

    def at(di, dj):
        return up[m + dj:m + dj + ny, m + di:m + di + nx]

    hx, hy = m * grid.h1, m * grid.h2
    with np.errstate(invalid="ignore", over="ignore"):
        uxx = (at(m, 0) - 2 * u + at(-m, 0)) / hx ** 2
        uyy = (at(0, m) - 2 * u + at(0, -m)) / hy ** 2
        uxy = (at(m, m) - at(m, -m) - at(-m, m) + at(-m, -m)) / (4 * hx * hy)
    bad = ~(np.isfinite(uxx) & np.isfinite(uyy) & np.isfinite(uxy))
    return (np.where(bad, np.nan, uxx), np.where(bad, np.nan, uxy), np.where(bad, np.nan, uyy))


class QuasiPotentialSurface:
    """u with its gradient and Hessian fields, interpolated bilinearly"""

    def __init__(self, u: FieldLike, grid: Grid, hessian_mult: int = 4):
        self.u = _as_field(u)
        self.grid = grid
        self.hessian_mult = hessian_mult
        self.gradient = gradient_field(self.u, grid)
        axes = (grid.ys, grid.xs)
        finite_u = np.where(np.isfinite(self.u), self.u, np.nan)
        self._value = RegularGridInterpolator(axes, finite_u, bounds_error=False, fill_value=np.nan)
        self._gx = RegularGridInterpolator(axes, self.gradient.gx, bounds_error=False, fill_value=np.nan)
        self._gy = RegularGridInterpolator(axes, self.gradient.gy, bounds_error=False, fill_value=np.nan)
        self._hess = None

    def _hessian_interpolators(self):
        if self._hess is None:
            axes = (self.grid.ys, self.grid.xs)
            self._hess = tuple(
                RegularGridInterpolator(axes, comp, bounds_error=False, fill_value=np.nan)
                for comp in hessian_field(self.u, self.grid, self.hessian_mult)
            )
        return self._hess

    def value_at(self, x: Sequence[float]) -> float:
        return float(self._value([[x[1], x[0]]])[0])

    def gradient_at(self, x: Sequence[float]) -> np.ndarray:
        q = [[x[1], x[0]]]
        return np.array([self._gx(q)[0], self._gy(q)[0]])

    def hessian_at(self, x: Sequence[float]) -> np.ndarray:
        q = [[x[1], x[0]]]
        hxx, hxy, hyy = (float(f(q)[0]) for f in self._hessian_interpolators())
        return np.array([[hxx, hxy], [hxy, hyy]])

    def is_accepted(self, x: Sequence[float]) -> bool:
        return bool(np.isfinite(self.value_at(x)) and np.all(np.isfinite(self.gradient_at(x))))


@dataclass
class MapTrace:
    path: Path
    status: str
    steps: int


def _target_distance(model: Model, target: Optional[np.ndarray], x: np.ndarray) -> float:
    if target is not None:
        return float(np.linalg.norm(x - target))
    pts = model.attractor.points
    return float(np.min(np.linalg.norm(pts - x, axis=1)))


def trace_map(u: Union[FieldLike, QuasiPotentialSurface], model: Model, start: Sequence[float], grid: Grid,
              step: Optional[float] = None, target: Optional[Sequence[float]] = None,
              max_steps: Optional[int] = None) -> MapTrace:
    """Shoot the characteristic backward from start to the attractor.

    RK4 on dpsi/ds = -(b + D grad U) / |b + D grad U| with fixed step (h/2
    by default). Status is success, stalled, left_region or max_steps.
    """
    surface = u if isinstance(u, QuasiPotentialSurface) else QuasiPotentialSurface(u, grid)
    h = grid.h
    step = 0.5 * h if step is None else float(step)
    max_steps = 20 * (grid.nx + grid.ny) if max_steps is None else int(max_steps)
    if target is None and model.attractor.kind == AttractorKind.STABLE_POINT:
        target = model.attractor.point
    target = None if target is None else np.asarray(target, dtype=float)

    x = np.asarray(start, dtype=float).copy()
    if not grid.domain.contains(x) or not surface.is_accepted(x):
        raise PathTracingError(f"MAP start {x.tolist()} is outside the accepted region")

    def rhs(p):
        g = surface.gradient_at(p)
        if not np.all(np.isfinite(g)):
            return None, "left_region"
        try:
            v = model.drift(p) + model.diffusion_tensor(p) @ g
        except ModelDomainError:
            return None, "left_region"
        norm = float(np.linalg.norm(v))
        if norm < STALL_NORM:
            return None, "stalled"
        return -v / norm, ""

    vertices = [x.copy()]
    status = "max_steps"
    steps = 0
    for steps in range(1, max_steps + 1):
        if _target_distance(model, target, x) <= 2 * h:
            status = "success"
            steps -= 1
            break
        k1, why = rhs(x)
        if k1 is None:
            status = why
            break
        k2, why = rhs(x + 0.5 * step * k1)
        if k2 is None:
            status = why
            break
        k3, why = rhs(x + 0.5 * step * k2)
        if k3 is None:
            status = why
            break
        k4, why = rhs(x + step * k3)
        if k4 is None:
            status = why
            break
        x = x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not grid.domain.contains(x):
            status = "left_region"
            break
        vertices.append(x.copy())
    else:
        if _target_distance(model, target, x) <= 2 * h:
            status = "success"

    if status != "success":
        logger.warning(f"MAP from {np.round(start, 6).tolist()} ended with status '{status}' after {steps} steps")
    return MapTrace(path=Path(np.array(vertices)), status=status, steps=steps)


def unstable_direction(model: Model, saddle: Sequence[float]) -> Tuple[float, np.ndarray]:
    """(lambda_plus, unit eigenvector) of J at a saddle"""
    J = model.jacobian(saddle)
    vals, vecs = np.linalg.eig(J)
    real = np.real(vals)
    if not (np.any(real > 0) and np.any(real < 0)) or np.any(np.abs(np.imag(vals)) > 1e-12 * np.abs(vals).max()):
        raise NotASaddleError(f"J at {tuple(np.round(saddle, 8))} has eigenvalues {vals}, not a saddle")
    k = int(np.argmax(real))
    e = np.real(vecs[:, k])
    return float(real[k]), e / np.linalg.norm(e)


def map_from_saddle(surface: QuasiPotentialSurface, model: Model, saddle: Sequence[float],
                    attractor: Optional[Sequence[float]] = None, step: Optional[float] = None) -> MapTrace:
    """MAP from the attractor to a saddle, returned attractor-first with the saddle appended"""
    saddle = np.asarray(saddle, dtype=float)
    if attractor is None:
        attractor = model.attractor.point
    attractor = np.asarray(attractor, dtype=float)
    _, e = unstable_direction(model, saddle)
    if e @ (attractor - saddle) < 0:
        e = -e
    start = saddle + 2 * surface.grid.h * e
    trace = trace_map(surface, model, start, surface.grid, step=step, target=attractor)
    path = trace.path.reversed().appended(saddle)
    return MapTrace(path=path, status=trace.status, steps=trace.steps)


def hj_residual(u: FieldLike, model: Model, grid: Grid) -> np.ndarray:
    """grad U^T D grad U + 2 b . grad U at nodes with a valid gradient"""
    grad = gradient_field(u, grid)
    X, Y = grid.mesh()
    with np.errstate(invalid="ignore", over="ignore"):
        b1, b2 = model.drift_field(X, Y)
        d11, d12, d22 = model.diffusion_tensor_field(X, Y)
        gx, gy = grad.gx, grad.gy
        r = d11 * gx * gx + 2 * d12 * gx * gy + d22 * gy * gy + 2 * (b1 * gx + b2 * gy)
    return np.where(grad.valid, r, np.nan)


@dataclass
class DecomposedField:
    l1: np.ndarray
    l2: np.ndarray
    metadata: Dict[str, object]


def decompose_field(u: FieldLike, model: Model, grid: Grid, convention: str = "isotropic") -> DecomposedField:
    """Rotational component l = b + 1/2 grad U (or b + 1/2 D grad U for convention='anisotropic')"""
    if convention not in ("isotropic", "anisotropic"):
        raise ValueError(f"unknown convention '{convention}'")
    grad = gradient_field(u, grid)
    X, Y = grid.mesh()
    with np.errstate(invalid="ignore", over="ignore"):
        b1, b2 = model.drift_field(X, Y)
        gx, gy = grad.gx, grad.gy
        if convention == "anisotropic":
            d11, d12, d22 = model.diffusion_tensor_field(X, Y)
            gx = d11 * grad.gx + d12 * grad.gy
            gy = d12 * grad.gx + d22 * grad.gy
        l1 = np.where(grad.valid, b1 + 0.5 * gx, np.nan)
        l2 = np.where(grad.valid, b2 + 0.5 * gy, np.nan)

    d11, d12, d22 = model.diffusion_tensor_field(X, Y)
    identity_noise = bool(np.nanmax(np.abs(d11 - 1)) < 1e-12 and np.nanmax(np.abs(d12)) < 1e-12
                          and np.nanmax(np.abs(d22 - 1)) < 1e-12)
    metadata: Dict[str, object] = {"convention": convention, "identity_diffusion": identity_noise}
    if convention == "isotropic" and not identity_noise:
        metadata["caveat"] = ("sigma is not the identity: l = b + grad U / 2 is not orthogonal to grad U; "
                              "use the HJ residual to judge the field")
    return DecomposedField(l1=l1, l2=l2, metadata=metadata)


@dataclass
class ErrorReport:
    max_abs: float
    rms: float
    normalized_max_abs: float
    n_valid_nodes: int

    def to_record(self) -> str:
        return "\n".join(f"{k}={v!r}" for k, v in self.__dict__.items()) + "\n"


def error_field(u: FieldLike, model: Model, grid: Grid) -> np.ndarray:
    """U - U_exact where u is finite, NaN elsewhere"""
    if not model.has_exact_u:
        raise MissingExactSolutionError(f"model '{model.name}' has no exact quasi-potential")
    field_u = _as_field(u)
    X, Y = grid.mesh()
    with np.errstate(invalid="ignore"):
        exact = model.exact_u_field(X, Y)
    return np.where(np.isfinite(field_u), field_u - exact, np.nan)


def error_report(u: FieldLike, model: Model, grid: Grid) -> ErrorReport:
    """Max/RMS error over computed nodes; normalized by the max computed U"""
    field_u = _as_field(u)
    err = error_field(field_u, model, grid)
    mask = np.isfinite(field_u) & np.isfinite(err)
    n = int(mask.sum())
    if n == 0:
        return ErrorReport(max_abs=float("nan"), rms=float("nan"), normalized_max_abs=float("nan"), n_valid_nodes=0)
    e = np.abs(err[mask])
    max_abs = float(e.max())
    max_u = float(field_u[mask].max())
    normalized = max_abs / max_u if max_u > 0 else float("nan")
    return ErrorReport(max_abs=max_abs, rms=float(np.sqrt(np.mean(e * e))),
                       normalized_max_abs=normalized, n_valid_nodes=n)


def invariant_density(u: FieldLike, epsilon: float = 1.0) -> np.ndarray:
    """exp(-U/eps), 0 where U was not computed"""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    field_u = _as_field(u)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(np.isfinite(field_u), np.exp(-field_u / epsilon), 0.0)
