"""
Sharp expected exit time from a basin of attraction through a saddle:

    T = 2 pi / lambda_+ * sqrt(|det H(x*)| / det H(x0)) * exp(int F ds) * exp(U(x*) / eps)

with F = div b + 1/2 tr(D H) + a . grad U, a_i = sum_j d_j D_ij and the integral
taken along the arc-length parametrized MAP from x0 to x*.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    DegenerateHessianError,
    EquilibriumNotFoundError,
    NotASaddleError,
    RateNotApplicableError,
    StencilError,
)
from .grid_core import Grid
from .models.base import Model, refine_equilibrium
from .olim_solver import SolveResult
from .postproc import FieldLike, Path, QuasiPotentialSurface, _as_field, map_from_saddle, unstable_direction

logger = logging.getLogger(__name__)

DEFAULT_HESSIAN_MULT = 4
NODE_SNAP = 1e-9


@dataclass
class RateRequest:
    epsilon: float
    saddle: np.ndarray
    equilibrium: np.ndarray
    map: Path
    hessian_stencil_mult: int = DEFAULT_HESSIAN_MULT

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.hessian_stencil_mult < 1:
            raise ValueError("hessian_stencil_mult must be >= 1")
        self.saddle = np.asarray(self.saddle, dtype=float)
        self.equilibrium = np.asarray(self.equilibrium, dtype=float)

    def check_endpoints(self, h: float):
        if np.linalg.norm(self.map.start - self.equilibrium) > 2 * h:
            raise StencilError(f"MAP starts {np.linalg.norm(self.map.start - self.equilibrium):.3g} "
                               f"away from the equilibrium (allowed {2 * h:.3g})")
        if np.linalg.norm(self.map.end - self.saddle) > 2 * h:
            raise StencilError(f"MAP ends {np.linalg.norm(self.map.end - self.saddle):.3g} away from the saddle")


@dataclass
class RateEstimate:
    expected_time: float
    rate: float
    barrier: float
    epsilon: float
    lambda_plus: float
    det_h_equilibrium: float
    det_h_saddle: float
    integral_f: float
    exp_integral_f: float
    prefactor: float
    exponential_factor: float
    log_expected_time: float
    saddle_x: float
    saddle_y: float
    map_length: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_record(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in self.to_dict().items())


def _node_hessian(field_u: np.ndarray, grid: Grid, i: int, j: int, m: int) -> np.ndarray:
    if i - m < 0 or j - m < 0 or i + m >= grid.nx or j + m >= grid.ny:
        raise StencilError(f"Hessian stencil (m={m}) around node ({i},{j}) leaves the mesh")
    stencil = field_u[j - m:j + m + 1:m, i - m:i + m + 1:m]
    if not np.all(np.isfinite(stencil)):
        raise StencilError(f"Hessian stencil (m={m}) around node ({i},{j}) reaches uncomputed nodes")
    hx, hy = m * grid.h1, m * grid.h2
    c = stencil[1, 1]
    uxx = (stencil[1, 2] - 2 * c + stencil[1, 0]) / hx ** 2
    uyy = (stencil[2, 1] - 2 * c + stencil[0, 1]) / hy ** 2
    uxy = (stencil[2, 2] - stencil[0, 2] - stencil[2, 0] + stencil[0, 0]) / (4 * hx * hy)
    return np.array([[uxx, uxy], [uxy, uyy]])


def hessian_of_u(u: FieldLike, grid: Grid, at: Sequence[float], m: int = DEFAULT_HESSIAN_MULT) -> np.ndarray:
    """Second differences with spacing m*h, blended bilinearly from the nodes of the cell holding `at`"""
    field_u = _as_field(u)
    d = grid.domain
    fi = (at[0] - d.xmin) / grid.h1
    fj = (at[1] - d.ymin) / grid.h2
    i0 = min(max(int(math.floor(fi)), 0), grid.nx - 2)
    j0 = min(max(int(math.floor(fj)), 0), grid.ny - 2)
    ti = min(max(fi - i0, 0.0), 1.0)
    tj = min(max(fj - j0, 0.0), 1.0)
    # snap to the node so on-node queries use a single stencil
    ti = 0.0 if ti < NODE_SNAP else 1.0 if ti > 1.0 - NODE_SNAP else ti
    tj = 0.0 if tj < NODE_SNAP else 1.0 if tj > 1.0 - NODE_SNAP else tj

    H = np.zeros((2, 2))
    for di, wi in ((0, 1.0 - ti), (1, ti)):
        for dj, wj in ((0, 1.0 - tj), (1, tj)):
            w = wi * wj
            if w > 0.0:
                H += w * _node_hessian(field_u, grid, i0 + di, j0 + dj, m)
    return H


def f_integrand(model: Model, surface: QuasiPotentialSurface, x: Sequence[float]) -> float:
    """F(x) = div b + 1/2 tr(D H) + a . grad U"""
    div_b, a = model.divergence_data(x)
    g = surface.gradient_at(x)
    H = surface.hessian_at(x)
    D = model.diffusion_tensor(x)
    value = div_b + 0.5 * float(np.sum(D * H)) + float(a @ g)
    if not math.isfinite(value):
        raise StencilError(f"F is not computable at {tuple(np.round(x, 6))}")
    return value


def integrate_f(model: Model, surface: QuasiPotentialSurface, path: Path) -> float:
    values = np.array([f_integrand(model, surface, x) for x in path.vertices])
    return float(trapezoid(values, path.arclength))


def find_saddle(model: Model, seed: Sequence[float], tol: float = 1e-10, max_iter: int = 100) -> np.ndarray:
    """Newton-refine seed on b(x) = 0 and require a saddle there"""
    x = refine_equilibrium(model, seed, tol=tol, max_iter=max_iter)
    vals = np.linalg.eigvals(model.jacobian(x))
    if not (np.any(vals.real > 0) and np.any(vals.real < 0)):
        raise NotASaddleError(f"equilibrium {x.tolist()} found from seed {tuple(seed)} is not a saddle "
                              f"(J eigenvalues {vals})")
    return x


def transition_time(request: RateRequest, solve_result: SolveResult, model: Model) -> RateEstimate:
    if not model.rate_applicable:
        raise RateNotApplicableError(f"rate formula refused for '{model.name}': {model.rate_note}")
    grid = solve_result.grid
    m = request.hessian_stencil_mult
    surface = QuasiPotentialSurface(solve_result.u, grid, hessian_mult=m)

    lambda_plus, _ = unstable_direction(model, request.saddle)
    H0 = hessian_of_u(solve_result.u, grid, request.equilibrium, m)
    Hs = hessian_of_u(solve_result.u, grid, request.saddle, m)
    det0 = float(np.linalg.det(H0))
    dets = abs(float(np.linalg.det(Hs)))
    if not det0 > 0:
        raise DegenerateHessianError(f"det H at the equilibrium is {det0:.3e} (must be > 0)")
    if not dets > 0:
        raise DegenerateHessianError("det H at the saddle vanishes")

    barrier = surface.value_at(request.saddle)
    if not math.isfinite(barrier):
        raise StencilError(f"U is not computed at the saddle {request.saddle.tolist()}")

    integral = integrate_f(model, surface, request.map)
    log_prefactor = math.log(2 * math.pi / lambda_plus) + 0.5 * math.log(dets / det0) + integral
    log_t = log_prefactor + barrier / request.epsilon
    with np.errstate(over="ignore"):
        T = float(np.exp(log_t))
        exp_order = float(np.exp(barrier / request.epsilon))
    estimate = RateEstimate(
        expected_time=T,
        rate=1.0 / T,
        barrier=barrier,
        epsilon=request.epsilon,
        lambda_plus=lambda_plus,
        det_h_equilibrium=det0,
        det_h_saddle=dets,
        integral_f=integral,
        exp_integral_f=math.exp(integral),
        prefactor=math.exp(log_prefactor),
        exponential_factor=exp_order,
        log_expected_time=log_t,
        saddle_x=float(request.saddle[0]),
        saddle_y=float(request.saddle[1]),
        map_length=request.map.length,
    )
    logger.info(f"Rate estimate: U*={barrier:.6g}, lambda+={lambda_plus:.4g}, int F={integral:.4g}, "
                f"T={T:.6g}, rate={estimate.rate:.6g}")
    return estimate


def estimate_rate(model: Model, solve_result: SolveResult, saddle_seed: Optional[Sequence[float]] = None,
                  epsilon: float = 1.0, hessian_stencil_mult: int = DEFAULT_HESSIAN_MULT,
                  step: Optional[float] = None) -> RateEstimate:
    """Saddle search, MAP tracing and the rate formula in one call"""
    if not model.rate_applicable:
        raise RateNotApplicableError(f"rate formula refused for '{model.name}': {model.rate_note}")
    if saddle_seed is None:
        if not model.known_saddles:
            raise NotASaddleError(f"model '{model.name}' has no known saddle; pass a seed")
        saddle_seed = model.known_saddles[0]
    try:
        saddle = find_saddle(model, saddle_seed)
    except EquilibriumNotFoundError as e:
        raise NotASaddleError(f"saddle search from {tuple(saddle_seed)} failed: {e}")
    surface = QuasiPotentialSurface(solve_result.u, solve_result.grid, hessian_mult=hessian_stencil_mult)
    trace = map_from_saddle(surface, model, saddle, step=step)
    if trace.status != "success":
        raise StencilError(f"MAP from the saddle did not reach the attractor (status {trace.status})")
    request = RateRequest(epsilon=epsilon, saddle=saddle, equilibrium=model.attractor.point,
                          map=trace.path, hessian_stencil_mult=hessian_stencil_mult)
    request.check_endpoints(solve_result.grid.h)
    return transition_time(request, solve_result, model)
