"""
A-weighted norms, the midpoint-rule geometric action on straight segments,
the one-point and triangle update rules and the 1-D root solve behind them.

The compiled functions work on plain floats and a packed triangle record so
the solver kernel can call them without allocating; the Python functions at
the bottom are the checked public API.

Packed triangle record (float64[18]):
    0-1 x0, 2-3 x1, 4-5 x, 6 U0, 7 U1, 8-9 b_m0, 10-11 b_m1,
    12-14 A_m0 (a11, a12, a22), 15-17 A_m1 (a11, a12, a22)
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .errors import DerivativeUndefinedError, NonPositiveDefiniteError, RootBracketError

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-12
ROOT_TOL_F = 1e-12
ROOT_MAX_ITER = 100
DEGENERATE_AREA = 1e-12
TINY_NORM = 1e-30

# triangle_update status codes
TRI_OK = 0
TRI_NO_SIGN_CHANGE = 1
TRI_ROOT_FAILED = 2
TRI_NOT_BELOW_ENDPOINTS = 3


@njit(cache=True)
def _quad(v1, v2, a11, a12, a22):
    return a11 * v1 * v1 + 2.0 * a12 * v1 * v2 + a22 * v2 * v2


@njit(cache=True)
def _inner(v1, v2, w1, w2, a11, a12, a22):
    return a11 * v1 * w1 + a12 * (v1 * w2 + v2 * w1) + a22 * v2 * w2


@njit(cache=True)
def segment_action_kernel(dx, dy, b1, b2, a11, a12, a22):
    """|v|_A |b|_A - <v, b>_A for v = (dx, dy), clamped at 0"""
    vv = _quad(dx, dy, a11, a12, a22)
    bb = _quad(b1, b2, a11, a12, a22)
    vb = _inner(dx, dy, b1, b2, a11, a12, a22)
    val = math.sqrt(max(vv, 0.0)) * math.sqrt(max(bb, 0.0)) - vb
    if val > 0.0:
        return val
    return 0.0


@njit(cache=True)
def _triangle_state(s, p):
    v1 = p[4] - (p[0] + s * (p[2] - p[0]))
    v2 = p[5] - (p[1] + s * (p[3] - p[1]))
    b1 = p[8] + s * (p[10] - p[8])
    b2 = p[9] + s * (p[11] - p[9])
    a11 = p[12] + s * (p[15] - p[12])
    a12 = p[13] + s * (p[16] - p[13])
    a22 = p[14] + s * (p[17] - p[14])
    return v1, v2, b1, b2, a11, a12, a22


@njit(cache=True)
def triangle_objective_kernel(s, p):
    v1, v2, b1, b2, a11, a12, a22 = _triangle_state(s, p)
    vv = _quad(v1, v2, a11, a12, a22)
    bb = _quad(b1, b2, a11, a12, a22)
    vb = _inner(v1, v2, b1, b2, a11, a12, a22)
    return p[6] + s * (p[7] - p[6]) + math.sqrt(max(vv, 0.0)) * math.sqrt(max(bb, 0.0)) - vb


@njit(cache=True)
def triangle_derivative_kernel(s, p):
    """d/ds of the triangle objective; NaN when |x - x_s|_A vanishes"""
    v1, v2, b1, b2, a11, a12, a22 = _triangle_state(s, p)
    # dv/ds = x0 - x1, db/ds = b_m1 - b_m0, dA/ds = A_m1 - A_m0
    dx1 = p[0] - p[2]
    dx2 = p[1] - p[3]
    db1 = p[10] - p[8]
    db2 = p[11] - p[9]
    da11 = p[15] - p[12]
    da12 = p[16] - p[13]
    da22 = p[17] - p[14]

    nv = math.sqrt(max(_quad(v1, v2, a11, a12, a22), 0.0))
    nb = math.sqrt(max(_quad(b1, b2, a11, a12, a22), 0.0))
    if nv == 0.0:
        return np.nan

    num_v = _inner(v1, v2, dx1, dx2, a11, a12, a22) + 0.5 * _quad(v1, v2, da11, da12, da22)
    num_b = _inner(b1, b2, db1, db2, a11, a12, a22) + 0.5 * _quad(b1, b2, da11, da12, da22)

    term_v = nb / nv * num_v
    if nb < TINY_NORM:
        if num_b == 0.0:
            term_b = 0.0
        else:
            term_b = math.copysign(np.inf, num_b)
    else:
        term_b = nv / nb * num_b

    cross = (_inner(dx1, dx2, b1, b2, a11, a12, a22)
             + _inner(v1, v2, db1, db2, a11, a12, a22)
             + _inner(v1, v2, b1, b2, da11, da12, da22))
    return (p[7] - p[6]) + term_v + term_b - cross


@njit
def _hybrid_secant_bisection(f, args, a, b, tol, tol_f, max_iter):
    """Secant steps kept only strictly inside the bracket; bisection otherwise
    or when the bracket has not halved over two steps.

    Returns (root, converged, iterations).
    """
    fa = f(a, *args)
    fb = f(b, *args)
    if fa == 0.0:
        return a, True, 0
    if fb == 0.0:
        return b, True, 0
    if not fa * fb < 0.0:
        return np.nan, False, 0

    x_prev, f_prev = a, fa
    x_cur, f_cur = b, fb
    width_1 = np.inf
    width_2 = np.inf
    for it in range(max_iter):
        width = abs(b - a)
        if width <= tol:
            return 0.5 * (a + b), True, it
        lo = min(a, b)
        hi = max(a, b)
        if f_cur != f_prev:
            s = x_cur - f_cur * (x_cur - x_prev) / (f_cur - f_prev)
        else:
            s = np.nan
        stalled = width > 0.5 * width_2
        if stalled or not (lo < s < hi):
            s = 0.5 * (a + b)
        fs = f(s, *args)
        if abs(fs) <= tol_f:
            return s, True, it + 1
        x_prev, f_prev = x_cur, f_cur
        x_cur, f_cur = s, fs
        if fa * fs < 0.0:
            b, fb = s, fs
        else:
            a, fa = s, fs
        width_2 = width_1
        width_1 = width
    return 0.5 * (a + b), False, max_iter


@njit
def triangle_update_kernel(p, tol, tol_f, max_iter):
    """(value, status); value is NaN unless status == TRI_OK"""
    d0 = triangle_derivative_kernel(0.0, p)
    d1 = triangle_derivative_kernel(1.0, p)
    if not (d0 < 0.0 and d1 > 0.0):
        return np.nan, TRI_NO_SIGN_CHANGE
    root, converged, _ = _hybrid_secant_bisection(
        triangle_derivative_kernel, (p,), 0.0, 1.0, tol, tol_f * (1.0 + abs(p[7] - p[6])), max_iter)
    if not converged:
        return np.nan, TRI_ROOT_FAILED
    val = triangle_objective_kernel(root, p)
    ends = min(triangle_objective_kernel(0.0, p), triangle_objective_kernel(1.0, p))
    if not val <= ends + tol:
        return np.nan, TRI_NOT_BELOW_ENDPOINTS
    return val, TRI_OK


# ---------------------------------------------------------------------------
# Python API
# ---------------------------------------------------------------------------

def a_norm(v: Sequence[float], A: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    q = float(v @ np.asarray(A, dtype=float) @ v)
    if q < -1e-14:
        raise NonPositiveDefiniteError(f"v^T A v = {q:.3e} < 0 for v={v.tolist()}")
    return math.sqrt(max(q, 0.0))


@dataclass
class SegmentActionInputs:
    x0: np.ndarray
    x: np.ndarray
    U0: float
    A_m: np.ndarray
    b_m: np.ndarray

    def action(self) -> float:
        v = np.asarray(self.x, dtype=float) - np.asarray(self.x0, dtype=float)
        A = np.asarray(self.A_m, dtype=float)
        return segment_action_kernel(v[0], v[1], float(self.b_m[0]), float(self.b_m[1]),
                                     A[0, 0], 0.5 * (A[0, 1] + A[1, 0]), A[1, 1])

    def one_point_value(self) -> float:
        return self.U0 + self.action()


def segment_inputs(x0, x, U0: float, model) -> SegmentActionInputs:
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    xm = 0.5 * (x0 + x)
    return SegmentActionInputs(x0=x0, x=x, U0=U0, A_m=model.covariance_inverse(xm), b_m=model.drift(xm))


def geometric_action_segment(x0, x, model) -> float:
    """Midpoint-rule geometric action along the segment [x0, x]"""
    return segment_inputs(x0, x, 0.0, model).action()


def one_point_update(x0, x, U0: float, model) -> float:
    return segment_inputs(x0, x, U0, model).one_point_value()


@dataclass
class TriangleUpdateProblem:
    x0: np.ndarray
    x1: np.ndarray
    x: np.ndarray
    U0: float
    U1: float
    b_m0: np.ndarray
    b_m1: np.ndarray
    A_m0: np.ndarray
    A_m1: np.ndarray

    @classmethod
    def from_model(cls, model, x0, x1, x, U0: float, U1: float) -> "TriangleUpdateProblem":
        x0 = np.asarray(x0, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        x = np.asarray(x, dtype=float)
        m0 = 0.5 * (x0 + x)
        m1 = 0.5 * (x1 + x)
        return cls(x0=x0, x1=x1, x=x, U0=float(U0), U1=float(U1),
                   b_m0=model.drift(m0), b_m1=model.drift(m1),
                   A_m0=model.covariance_inverse(m0), A_m1=model.covariance_inverse(m1))

    @property
    def twice_area(self) -> float:
        e1 = np.asarray(self.x1, dtype=float) - self.x0
        e2 = np.asarray(self.x, dtype=float) - self.x0
        return abs(e1[0] * e2[1] - e1[1] * e2[0])

    def is_degenerate(self, h: float) -> bool:
        return self.twice_area < DEGENERATE_AREA * h * h

    def packed(self) -> np.ndarray:
        A0 = np.asarray(self.A_m0, dtype=float)
        A1 = np.asarray(self.A_m1, dtype=float)
        return np.array([
            self.x0[0], self.x0[1], self.x1[0], self.x1[1], self.x[0], self.x[1],
            self.U0, self.U1,
            self.b_m0[0], self.b_m0[1], self.b_m1[0], self.b_m1[1],
            A0[0, 0], 0.5 * (A0[0, 1] + A0[1, 0]), A0[1, 1],
            A1[0, 0], 0.5 * (A1[0, 1] + A1[1, 0]), A1[1, 1],
        ], dtype=float)


def triangle_objective(problem: TriangleUpdateProblem, s: float) -> float:
    return float(triangle_objective_kernel(float(s), problem.packed()))


def triangle_objective_derivative(problem: TriangleUpdateProblem, s: float) -> float:
    d = triangle_derivative_kernel(float(s), problem.packed())
    if math.isnan(d):
        raise DerivativeUndefinedError(f"|x - x_s|_A vanishes at s={s}")
    return float(d)


def triangle_update(problem: TriangleUpdateProblem, h: Optional[float] = None) -> Optional[float]:
    """Interior minimum of the triangle objective, or None when there is none"""
    if h is not None and problem.is_degenerate(h):
        return None
    value, status = triangle_update_kernel(problem.packed(), ROOT_TOL, ROOT_TOL_F, ROOT_MAX_ITER)
    if status != TRI_OK:
        if status == TRI_ROOT_FAILED:
            logger.debug("Triangle root solve did not converge")
        return None
    return float(value)


def triangle_minimizer(problem: TriangleUpdateProblem) -> Optional[float]:
    """s* of the interior minimum, for diagnostics"""
    p = problem.packed()
    d0 = triangle_derivative_kernel(0.0, p)
    d1 = triangle_derivative_kernel(1.0, p)
    if not (d0 < 0.0 and d1 > 0.0):
        return None
    root, converged, _ = _hybrid_secant_bisection(
        triangle_derivative_kernel, (p,), 0.0, 1.0, ROOT_TOL,
        ROOT_TOL_F * (1.0 + abs(problem.U1 - problem.U0)), ROOT_MAX_ITER)
    return float(root) if converged else None


@dataclass
class RootSolveResult:
    root: float
    converged: bool
    iterations: int


def hybrid_secant_bisection(f: Callable[[float], float], a: float, b: float, tol: float = ROOT_TOL,
                            tol_f: float = ROOT_TOL_F, max_iter: int = ROOT_MAX_ITER) -> RootSolveResult:
    """Root of a Python callable on a sign-changing bracket [a, b]"""
    fa, fb = f(a), f(b)
    if fa * fb > 0:
        raise RootBracketError(f"f(a)={fa:.3e} and f(b)={fb:.3e} have the same sign")
    root, converged, iterations = _hybrid_secant_bisection.py_func(
        f, (), float(a), float(b), tol, tol_f, max_iter)
    if not converged:
        logger.warning(f"Root solve hit max_iter={max_iter}; returning bracket midpoint {root}")
    return RootSolveResult(root=float(root), converged=bool(converged), iterations=int(iterations))
