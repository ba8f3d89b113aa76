"""
Ordered line integral solver for the quasi-potential with anisotropic,
position-dependent diffusion.

The sweep is label-setting: the Considered node with the smallest tentative
value becomes AcceptedFront, Considered nodes within K*h of it are updated by
one-point and triangle updates, and its Unknown nearest neighbors become
Considered through the hierarchical update. b and A are sampled once at every
segment midpoint (the half-step lattice) before the sweep starts.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from numba import njit
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .action_kernel import (
    ROOT_MAX_ITER,
    ROOT_TOL,
    ROOT_TOL_F,
    TRI_OK,
    TRI_ROOT_FAILED,
    DEGENERATE_AREA,
    segment_action_kernel,
    triangle_update_kernel,
)
from .errors import ConsistencyError, InitializationError
from .grid_core import (
    NEIGHBOR8_OFFSETS,
    Domain,
    Grid,
    IndexedMinHeap,
    Label,
    far_offsets,
    heap_decrease,
    heap_pop,
    heap_push,
    neighbors8,
)
from .models.base import AttractorKind, Model, is_stable

logger = logging.getLogger(__name__)

MIN_NODES = 16
ANISOTROPY_WARN = 10.0
SAMPLE_CHUNK = 1 << 16

STAT_NAMES = (
    "heap_pops",
    "heap_pushes",
    "heap_decreases",
    "one_point_updates",
    "triangle_solves",
    "root_failures",
    "degenerate_triangles",
    "monotone_clamps",
    "triangle_accepted",
    "undefined_midpoints",
)


class BoundaryPolicy(str, Enum):
    STOP_ON_BOUNDARY = "StopOnBoundary"
    COMPUTE_WHOLE_DOMAIN = "ComputeWholeDomain"


def rule_of_thumb_K(N: int) -> int:
    """K = 10 + 4 (log2 N - 7), rounded"""
    if N < 2 ** 7:
        raise ValueError(f"rule of thumb needs N >= 128, got {N}")
    return int(round(10 + 4 * (math.log2(N) - 7)))


class SolverConfig(BaseModel):
    """Mesh, update factor and termination settings for one solve"""

    model_config = ConfigDict(extra="forbid")

    N: Optional[int] = None
    nx: Optional[int] = None
    ny: Optional[int] = None
    K: Optional[int] = Field(default=None, ge=1)
    domain: Optional[Domain] = None
    boundary_policy: Optional[BoundaryPolicy] = None
    init_radius_nodes: Optional[int] = Field(default=None, ge=1)
    root_tol: float = Field(default=ROOT_TOL, gt=0)
    root_tol_f: float = Field(default=ROOT_TOL_F, gt=0)
    root_max_iter: int = Field(default=ROOT_MAX_ITER, ge=1)

    @field_validator("N", "nx", "ny")
    @classmethod
    def _enough_nodes(cls, v):
        if v is not None and v < MIN_NODES:
            raise ValueError(f"mesh needs at least {MIN_NODES} nodes per axis, got {v}")
        return v

    @model_validator(mode="after")
    def _shape_given(self):
        if self.N is None and (self.nx is None or self.ny is None):
            raise ValueError("give N or both nx and ny")
        return self

    @property
    def shape(self) -> Tuple[int, int]:
        """(nx, ny)"""
        nx = self.nx if self.nx is not None else self.N
        ny = self.ny if self.ny is not None else self.N
        return nx, ny

    def resolve(self, model: Model) -> "SolverConfig":
        """Fill model defaults for domain, boundary policy and K"""
        nx, ny = self.shape
        K = self.K if self.K is not None else rule_of_thumb_K(max(nx, ny, 2 ** 7))
        return self.model_copy(update={
            "nx": nx,
            "ny": ny,
            "K": K,
            "domain": self.domain or model.default_domain,
            "boundary_policy": self.boundary_policy or BoundaryPolicy(model.default_boundary_policy),
            "init_radius_nodes": self.init_radius_nodes or K,
        })


@dataclass
class QuasiPotentialMatrix:
    M: np.ndarray
    residual: float = 0.0

    def value(self, dx: np.ndarray) -> np.ndarray:
        """(x - x0)^T M (x - x0) for rows of dx"""
        dx = np.atleast_2d(dx)
        return np.einsum("ni,ij,nj->n", dx, self.M, dx)

    @property
    def is_positive_definite(self) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.M) > 0))


def linear_quasipotential_matrix(J: np.ndarray, Sigma: np.ndarray) -> QuasiPotentialMatrix:
    """Quadratic quasi-potential of dx = Jx dt + Sigma sqrt(eps) dW"""
    J = np.asarray(J, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if abs(np.linalg.det(Sigma)) <= 1e-14 * float(np.sum(Sigma * Sigma)):
        raise InitializationError(f"Sigma is singular: {Sigma.tolist()}")
    if not is_stable(J):
        raise InitializationError(f"J is not stable, eigenvalues {np.linalg.eigvals(J)}")

    Si = np.linalg.inv(Sigma)
    g = Si @ J @ Sigma
    t = g[0, 0] + g[1, 1]
    w = g[1, 0] - g[0, 1]
    den = t * t + w * w
    alpha = t * t / den
    beta = w * t / den
    a = -(alpha * g[0, 0] + beta * g[1, 0])
    b = -(alpha * g[0, 1] + beta * g[1, 1])
    c = -(alpha * g[1, 1] - beta * g[0, 1])
    M = Si.T @ np.array([[a, b], [b, c]]) @ Si
    M = 0.5 * (M + M.T)

    D = Sigma @ Sigma.T
    quad = M @ D @ M
    lin = 0.5 * (J.T @ M + M @ J)
    scale = max(1.0, np.abs(quad).max(), np.abs(lin).max())
    residual = float(np.abs(quad + lin).max() / scale)
    if residual > 1e-10:
        raise ConsistencyError(f"quasi-potential matrix fails the HJ identity (residual {residual:.3e})")
    return QuasiPotentialMatrix(M=M, residual=residual)


@dataclass
class InitialFront:
    """Nodes seeded before the sweep"""

    considered: np.ndarray
    values: np.ndarray
    front: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    qp_matrix: Optional[QuasiPotentialMatrix] = None


def init_near_equilibrium(grid: Grid, model: Model, config: SolverConfig) -> InitialFront:
    """Quadratic initialization around a stable equilibrium"""
    if model.attractor.kind != AttractorKind.STABLE_POINT:
        raise InitializationError("equilibrium initialization needs a StablePoint attractor")
    x0 = np.asarray(model.attractor.point, dtype=float)
    if not grid.domain.contains(x0):
        raise InitializationError(f"attractor {x0.tolist()} lies outside the domain {grid.domain.as_tuple()}")
    J = model.jacobian(x0)
    if not is_stable(J):
        raise InitializationError(f"attractor {x0.tolist()} is not stable, J eigenvalues {np.linalg.eigvals(J)}")
    qpm = linear_quasipotential_matrix(J, model.diffusion(x0))

    fi = (x0[0] - grid.domain.xmin) / grid.h1
    fj = (x0[1] - grid.domain.ymin) / grid.h2
    on_node = abs(fi - round(fi)) < 1e-9 and abs(fj - round(fj)) < 1e-9
    if on_node:
        center = grid.index(int(round(fi)), int(round(fj)))
        nodes = np.array(neighbors8(grid, center), dtype=np.int64)
        front = np.array([center], dtype=np.int64)
    else:
        i = min(int(math.floor(fi)), grid.nx - 2)
        j = min(int(math.floor(fj)), grid.ny - 2)
        nodes = np.array([grid.index(i, j), grid.index(i + 1, j),
                          grid.index(i, j + 1), grid.index(i + 1, j + 1)], dtype=np.int64)
        front = np.zeros(0, dtype=np.int64)

    dx = np.array([grid.position(n) - x0 for n in nodes])
    values = qpm.value(dx)
    logger.info(f"Initialized {len(nodes)} nodes around {x0.tolist()} "
                f"({'mesh node' if on_node else 'cell interior'})")
    return InitialFront(considered=nodes, values=values, front=front, qp_matrix=qpm)


def _segment_action_field(y: np.ndarray, X: np.ndarray, Y: np.ndarray, model: Model) -> np.ndarray:
    MX = 0.5 * (X + y[0])
    MY = 0.5 * (Y + y[1])
    b1, b2 = model.drift_field(MX, MY)
    a11, a12, a22 = model.covariance_inverse_field(MX, MY)
    v1 = X - y[0]
    v2 = Y - y[1]
    vv = a11 * v1 * v1 + 2 * a12 * v1 * v2 + a22 * v2 * v2
    bb = a11 * b1 * b1 + 2 * a12 * b1 * b2 + a22 * b2 * b2
    vb = a11 * v1 * b1 + a12 * (v1 * b2 + v2 * b1) + a22 * v2 * b2
    return np.maximum(np.sqrt(np.maximum(vv, 0)) * np.sqrt(np.maximum(bb, 0)) - vb, 0.0)


def init_from_point_set(grid: Grid, model: Model, config: SolverConfig) -> InitialFront:
    """U(x) = min over attractor samples y with |x - y| <= K h of the segment action"""
    if model.attractor.kind != AttractorKind.POINT_SET:
        raise InitializationError("point-set initialization needs a PointSet attractor")
    samples = model.attractor.points
    if samples is None or len(samples) < 2:
        raise InitializationError("a point-set attractor needs at least 2 samples")
    radius_nodes = config.init_radius_nodes or config.K or 1
    radius = radius_nodes * grid.h
    U = np.full(grid.n_nodes, np.inf)
    d = grid.domain

    for y in samples:
        i_lo = max(int(math.ceil((y[0] - radius - d.xmin) / grid.h1)), 0)
        i_hi = min(int(math.floor((y[0] + radius - d.xmin) / grid.h1)), grid.nx - 1)
        j_lo = max(int(math.ceil((y[1] - radius - d.ymin) / grid.h2)), 0)
        j_hi = min(int(math.floor((y[1] + radius - d.ymin) / grid.h2)), grid.ny - 1)
        if i_lo > i_hi or j_lo > j_hi:
            continue
        ii, jj = np.meshgrid(np.arange(i_lo, i_hi + 1), np.arange(j_lo, j_hi + 1))
        X = d.xmin + ii * grid.h1
        Y = d.ymin + jj * grid.h2
        near = (X - y[0]) ** 2 + (Y - y[1]) ** 2 <= radius * radius * (1 + 1e-12)
        if not near.any():
            continue
        action = _segment_action_field(y, X[near], Y[near], model)
        nodes = ii[near] + jj[near] * grid.nx
        ok = np.isfinite(action)
        np.minimum.at(U, nodes[ok], action[ok])

    considered = np.flatnonzero(np.isfinite(U)).astype(np.int64)
    if considered.size == 0:
        raise InitializationError(f"no mesh node within {radius:.4g} of the attractor samples")
    logger.info(f"Initialized {considered.size} nodes from {len(samples)} attractor samples")
    return InitialFront(considered=considered, values=U[considered])


@dataclass
class MidpointFields:
    """b and A on the (2ny-1, 2nx-1) half-step lattice, flattened"""

    b1: np.ndarray
    b2: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    constant_a: bool

    def anisotropy_ratio(self) -> float:
        tr = self.a11 + self.a22
        disc = np.sqrt((self.a11 - self.a22) ** 2 + 4 * self.a12 ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (tr + disc) / (tr - disc)
        ratio = ratio[np.isfinite(ratio) & (ratio > 0)]
        return float(ratio.max()) if ratio.size else float("nan")


def sample_midpoint_fields(model: Model, grid: Grid) -> MidpointFields:
    d = grid.domain
    hx, hy = 2 * grid.nx - 1, 2 * grid.ny - 1
    xs = d.xmin + np.arange(hx) * (0.5 * grid.h1)
    ys = d.ymin + np.arange(hy) * (0.5 * grid.h2)
    b1 = np.empty(hx * hy)
    b2 = np.empty(hx * hy)

    constant_a = bool(model.constant_diffusion)
    if constant_a:
        center = np.array([0.5 * (d.xmin + d.xmax), 0.5 * (d.ymin + d.ymax)])
        A = model.covariance_inverse(center)
        a11, a12, a22 = np.array([A[0, 0]]), np.array([A[0, 1]]), np.array([A[1, 1]])
    else:
        a11 = np.empty(hx * hy)
        a12 = np.empty(hx * hy)
        a22 = np.empty(hx * hy)

    rows = max(1, SAMPLE_CHUNK // hx)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for r0 in range(0, hy, rows):
            r1 = min(hy, r0 + rows)
            X, Y = np.meshgrid(xs, ys[r0:r1])
            sl = slice(r0 * hx, r1 * hx)
            f1, f2 = model.drift_field(X, Y)
            b1[sl] = np.ravel(f1)
            b2[sl] = np.ravel(f2)
            if not constant_a:
                c11, c12, c22 = model.covariance_inverse_field(X, Y)
                a11[sl] = np.ravel(c11)
                a12[sl] = np.ravel(c12)
                a22[sl] = np.ravel(c22)
    return MidpointFields(b1=b1, b2=b2, a11=a11, a12=a12, a22=a22, constant_a=constant_a)


# ---------------------------------------------------------------------------
# compiled sweep
# ---------------------------------------------------------------------------

@njit
def _midpoint(hidx, mb1, mb2, ma11, ma12, ma22, const_a):
    if const_a:
        return mb1[hidx], mb2[hidx], ma11[0], ma12[0], ma22[0]
    return mb1[hidx], mb2[hidx], ma11[hidx], ma12[hidx], ma22[hidx]


@njit
def _one_point(ia, ja, ib, jb, Ua, nx, h1, h2, mb1, mb2, ma11, ma12, ma22, const_a, stats):
    hidx = (ja + jb) * (2 * nx - 1) + (ia + ib)
    b1, b2, a11, a12, a22 = _midpoint(hidx, mb1, mb2, ma11, ma12, ma22, const_a)
    if b1 != b1 or b2 != b2 or a11 != a11:
        stats[9] += 1
        return np.nan
    stats[3] += 1
    return Ua + segment_action_kernel((ib - ia) * h1, (jb - ja) * h2, b1, b2, a11, a12, a22)


@njit
def _triangle(i0, j0, i1, j1, i, j, U0, U1, nx, h1, h2, h, mb1, mb2, ma11, ma12, ma22, const_a,
              p, tol, tol_f, max_iter, stats):
    # coordinates relative to x0
    e1x = (i1 - i0) * h1
    e1y = (j1 - j0) * h2
    ex = (i - i0) * h1
    ey = (j - j0) * h2
    if abs(e1x * ey - e1y * ex) < DEGENERATE_AREA * h * h:
        stats[6] += 1
        return np.nan
    hx = 2 * nx - 1
    b01, b02, a011, a012, a022 = _midpoint((j0 + j) * hx + (i0 + i), mb1, mb2, ma11, ma12, ma22, const_a)
    b11, b12, a111, a112, a122 = _midpoint((j1 + j) * hx + (i1 + i), mb1, mb2, ma11, ma12, ma22, const_a)
    if b01 != b01 or b02 != b02 or a011 != a011 or b11 != b11 or b12 != b12 or a111 != a111:
        stats[9] += 1
        return np.nan
    p[0] = 0.0
    p[1] = 0.0
    p[2] = e1x
    p[3] = e1y
    p[4] = ex
    p[5] = ey
    p[6] = U0
    p[7] = U1
    p[8] = b01
    p[9] = b02
    p[10] = b11
    p[11] = b12
    p[12] = a011
    p[13] = a012
    p[14] = a022
    p[15] = a111
    p[16] = a112
    p[17] = a122
    stats[4] += 1
    val, status = triangle_update_kernel(p, tol, tol_f, max_iter)
    if status == TRI_ROOT_FAILED:
        stats[5] += 1
    elif status == TRI_OK:
        stats[8] += 1
    return val


@njit
def _front_done(node, nx, ny, nbr, label):
    """True when no nearest neighbor is Unknown or Considered"""
    i = node % nx
    j = node // nx
    for k in range(nbr.shape[0]):
        ii = i + nbr[k, 0]
        jj = j + nbr[k, 1]
        if ii < 0 or jj < 0 or ii >= nx or jj >= ny:
            continue
        if label[jj * nx + ii] < 2:
            return False
    return True


@njit
def _olim_kernel(nx, ny, h1, h2, far, nbr, mb1, mb2, ma11, ma12, ma22, const_a,
                 u, label, heap, pos, size, order, n_order, last, stop_on_boundary,
                 tol, tol_f, max_iter, stats):
    """Main loop; returns (n_accepted, terminated_on_boundary)"""
    UNKNOWN = 0
    CONSIDERED = 1
    FRONT = 2
    ACCEPTED = 3
    h = max(h1, h2)
    p = np.empty(18)
    nfar = far.shape[0]
    nnbr = nbr.shape[0]
    on_boundary = False

    while size[0] > 0:
        # 1: smallest Considered node joins the front
        x0 = heap_pop(heap, pos, u, size)
        stats[0] += 1
        label[x0] = FRONT
        order[n_order] = x0
        n_order += 1
        if u[x0] > last:
            last = u[x0]
        i0 = x0 % nx
        j0 = x0 // nx
        if stop_on_boundary and (i0 == 0 or j0 == 0 or i0 == nx - 1 or j0 == ny - 1):
            on_boundary = True
            break
        U0 = u[x0]

        # 2: retire front neighbors with no Unknown/Considered neighbors left
        for k in range(nnbr):
            ii = i0 + nbr[k, 0]
            jj = j0 + nbr[k, 1]
            if ii < 0 or jj < 0 or ii >= nx or jj >= ny:
                continue
            y = jj * nx + ii
            if label[y] == FRONT and _front_done(y, nx, ny, nbr, label):
                label[y] = ACCEPTED

        # 3: update Considered nodes within K h of x0
        for k in range(nfar):
            i = i0 + far[k, 0]
            j = j0 + far[k, 1]
            if i < 0 or j < 0 or i >= nx or j >= ny:
                continue
            x = j * nx + i
            if label[x] != CONSIDERED:
                continue
            best = _one_point(i0, j0, i, j, U0, nx, h1, h2, mb1, mb2, ma11, ma12, ma22, const_a, stats)
            for m in range(nnbr):
                i1 = i0 + nbr[m, 0]
                j1 = j0 + nbr[m, 1]
                if i1 < 0 or j1 < 0 or i1 >= nx or j1 >= ny:
                    continue
                x1 = j1 * nx + i1
                if label[x1] != FRONT:
                    continue
                val = _triangle(i0, j0, i1, j1, i, j, U0, u[x1], nx, h1, h2, h,
                                mb1, mb2, ma11, ma12, ma22, const_a, p, tol, tol_f, max_iter, stats)
                if val < best or best != best:
                    best = val
            if best != best:
                continue
            clamped = best < last
            if clamped:
                best = last
            if best < u[x]:
                heap_decrease(heap, pos, u, x, best)
                stats[2] += 1
                if clamped:
                    stats[7] += 1

        # 4: hierarchical update of Unknown nearest neighbors
        for k in range(nnbr):
            i = i0 + nbr[k, 0]
            j = j0 + nbr[k, 1]
            if i < 0 or j < 0 or i >= nx or j >= ny:
                continue
            x = j * nx + i
            if label[x] != UNKNOWN:
                continue
            best = _one_point(i0, j0, i, j, U0, nx, h1, h2, mb1, mb2, ma11, ma12, ma22, const_a, stats)
            y0 = x0 if best == best else -1
            if best != best:
                best = np.inf
            for m in range(nfar):
                iy = i + far[m, 0]
                jy = j + far[m, 1]
                if iy < 0 or jy < 0 or iy >= nx or jy >= ny:
                    continue
                y = jy * nx + iy
                if y == x0 or label[y] != FRONT:
                    continue
                val = _one_point(iy, jy, i, j, u[y], nx, h1, h2, mb1, mb2, ma11, ma12, ma22, const_a, stats)
                if val < best:
                    best = val
                    y0 = y
            if y0 < 0:
                continue
            iy0 = y0 % nx
            jy0 = y0 // nx
            for m in range(nnbr):
                i1 = iy0 + nbr[m, 0]
                j1 = jy0 + nbr[m, 1]
                if i1 < 0 or j1 < 0 or i1 >= nx or j1 >= ny:
                    continue
                y1 = j1 * nx + i1
                if label[y1] != FRONT:
                    continue
                val = _triangle(iy0, jy0, i1, j1, i, j, u[y0], u[y1], nx, h1, h2, h,
                                mb1, mb2, ma11, ma12, ma22, const_a, p, tol, tol_f, max_iter, stats)
                if val < best:
                    best = val
            if best < last:
                best = last
                stats[7] += 1
            label[x] = CONSIDERED
            heap_push(heap, pos, u, size, x, best)
            stats[1] += 1

        if _front_done(x0, nx, ny, nbr, label):
            label[x0] = ACCEPTED

    return n_order, on_boundary


@dataclass
class SolveResult:
    """u is +inf wherever the node was not accepted"""

    u: np.ndarray
    label: np.ndarray
    accept_order: np.ndarray
    stats: Dict[str, float]
    tentative: np.ndarray
    termination: str
    grid: Grid
    config: SolverConfig
    attractor: Optional[np.ndarray] = None
    qp_matrix: Optional[QuasiPotentialMatrix] = None
    anisotropy_ratio: float = float("nan")

    @property
    def valid(self) -> np.ndarray:
        return self.label >= Label.ACCEPTED_FRONT

    @property
    def max_u(self) -> float:
        return float(np.max(self.u[self.valid])) if self.valid.any() else float("nan")

    @property
    def accepted_values(self) -> np.ndarray:
        return self.u.ravel()[self.accept_order]

    def summary(self) -> Dict[str, object]:
        return {
            "nx": self.grid.nx,
            "ny": self.grid.ny,
            "K": self.config.K,
            "accepted": int(self.accept_order.size),
            "termination": self.termination,
            "max_u": self.max_u,
            "anisotropy_ratio": self.anisotropy_ratio,
        }


def solve(model: Model, config: SolverConfig) -> SolveResult:
    """Compute the quasi-potential of model on the mesh described by config"""
    cfg = config.resolve(model)
    grid = Grid(nx=cfg.nx, ny=cfg.ny, domain=cfg.domain)
    started = time.perf_counter()
    logger.info(f"🔧 Solving '{model.name}' on {grid.nx}x{grid.ny}, K={cfg.K}, "
                f"h={grid.h:.4g}, policy={cfg.boundary_policy.value}")

    fields = sample_midpoint_fields(model, grid)
    ratio = fields.anisotropy_ratio()
    if ratio > ANISOTROPY_WARN:
        logger.warning(f"Anisotropy ratio of A reaches {ratio:.3g} > {ANISOTROPY_WARN:g}; "
                       f"the rule-of-thumb K={cfg.K} may be too small for full accuracy")

    n = grid.n_nodes
    u = np.full(n, np.inf)
    label = np.zeros(n, dtype=np.int8)
    heap = IndexedMinHeap(n, keys=u)
    order = np.zeros(n, dtype=np.int64)
    stats = np.zeros(len(STAT_NAMES), dtype=np.int64)

    if model.attractor.kind == AttractorKind.STABLE_POINT:
        front = init_near_equilibrium(grid, model, cfg)
    else:
        front = init_from_point_set(grid, model, cfg)

    n_order = 0
    last = -np.inf
    for node in front.front:
        u[node] = 0.0
        label[node] = Label.ACCEPTED_FRONT
        order[n_order] = node
        n_order += 1
        last = max(last, 0.0)
    for node, value in zip(front.considered, front.values):
        if label[node] != Label.UNKNOWN:
            continue
        label[node] = Label.CONSIDERED
        heap.insert(int(node), float(value))
        stats[1] += 1
    if len(heap) == 0:
        raise InitializationError("initialization produced no Considered nodes")

    n_order, on_boundary = _olim_kernel(
        grid.nx, grid.ny, grid.h1, grid.h2, far_offsets(grid, cfg.K), NEIGHBOR8_OFFSETS,
        fields.b1, fields.b2, fields.a11, fields.a12, fields.a22, fields.constant_a,
        u, label, heap.heap, heap.pos, heap.size, order, n_order, last,
        cfg.boundary_policy == BoundaryPolicy.STOP_ON_BOUNDARY,
        cfg.root_tol, cfg.root_tol_f, cfg.root_max_iter, stats)

    considered = label == Label.CONSIDERED
    tentative = np.where(considered, u, np.inf)
    u_final = np.where(label >= Label.ACCEPTED_FRONT, u, np.inf)
    elapsed = time.perf_counter() - started

    stat_dict: Dict[str, float] = {name: int(v) for name, v in zip(STAT_NAMES, stats)}
    stat_dict["wall_time"] = elapsed
    termination = "boundary" if on_boundary else "exhausted"
    attractor = model.attractor.point if model.attractor.kind == AttractorKind.STABLE_POINT else None

    result = SolveResult(
        u=u_final.reshape(grid.shape),
        label=label.reshape(grid.shape),
        accept_order=order[:n_order].copy(),
        stats=stat_dict,
        tentative=tentative.reshape(grid.shape),
        termination=termination,
        grid=grid,
        config=cfg,
        attractor=attractor,
        qp_matrix=front.qp_matrix,
        anisotropy_ratio=ratio,
    )
    logger.info(f"✅ Accepted {n_order} of {n} nodes in {elapsed:.2f}s (termination: {termination}, "
                f"max U={result.max_u:.6g}, clamps={stat_dict['monotone_clamps']})")
    return result
