#!/usr/bin/env python3
"""
Tests for gradient reconstruction, MAP tracing, residuals and error metrics
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'services', 'olim'))

from app.errors import MissingExactSolutionError, NotASaddleError, PathTracingError
from app.grid_core import Domain, Grid
from app.models.linear import gradient_test_model
from app.models.maier_stein import maier_stein_model
from app.models.polar import polar_test_model
from app.postproc import (
    Path,
    QuasiPotentialSurface,
    decompose_field,
    error_report,
    gradient_field,
    hessian_field,
    hj_residual,
    invariant_density,
    map_from_saddle,
    trace_map,
    unstable_direction,
)

M = np.array([[1.5, -0.5], [-0.5, 1.5]])


def unit_box_grid(N=33):
    return Grid.square(N, Domain(xmin=-1, xmax=1, ymin=-1, ymax=1))


def quadratic(grid, matrix=M):
    X, Y = grid.mesh()
    return matrix[0, 0] * X * X + 2 * matrix[0, 1] * X * Y + matrix[1, 1] * Y * Y


def test_path_geometry():
    path = Path(np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 4.0], [3.0, 5.0]]))
    assert len(path) == 3
    assert path.length == pytest.approx(6.0)
    assert np.allclose(path.arclength, [0.0, 5.0, 6.0])
    assert np.allclose(path.reversed().start, [3.0, 5.0])
    assert path.appended((3.0, 7.0)).length == pytest.approx(8.0)


def test_gradient_of_linear_field():
    grid = unit_box_grid()
    X, _ = grid.mesh()
    grad = gradient_field(X, grid)
    assert grad.valid.all()
    assert np.allclose(grad.gx, 1.0)
    assert np.allclose(grad.gy, 0.0, atol=1e-12)


def test_gradient_of_quadratic_is_exact():
    grid = unit_box_grid()
    X, Y = grid.mesh()
    grad = gradient_field(quadratic(grid), grid)
    assert np.allclose(grad.gx, 2 * (M[0, 0] * X + M[0, 1] * Y), atol=1e-10)
    assert np.allclose(grad.gy, 2 * (M[1, 0] * X + M[1, 1] * Y), atol=1e-10)


def test_gradient_goes_one_sided_next_to_uncomputed_nodes():
    grid = unit_box_grid()
    X, Y = grid.mesh()
    u = quadratic(grid)
    u[:, 20:] = np.inf
    grad = gradient_field(u, grid)
    assert not grad.valid[:, 20:].any()
    assert grad.valid[:, 19].all()
    assert np.allclose(grad.gx[:, 19], 2 * (M[0, 0] * X[:, 19] + M[0, 1] * Y[:, 19]), atol=1e-10)


def test_isolated_node_has_no_gradient():
    grid = unit_box_grid(9)
    u = np.full(grid.shape, np.inf)
    u[4, 4] = 1.0
    grad = gradient_field(u, grid)
    assert not grad.valid.any()


def test_hessian_of_quadratic():
    grid = unit_box_grid()
    uxx, uxy, uyy = hessian_field(quadratic(grid), grid, m=2)
    inner = (slice(2, -2), slice(2, -2))
    assert np.allclose(uxx[inner], 2 * M[0, 0])
    assert np.allclose(uxy[inner], 2 * M[0, 1])
    assert np.allclose(uyy[inner], 2 * M[1, 1])
    assert np.isnan(uxx[0, 0]) and np.isnan(uxy[1, 5])
    surface = QuasiPotentialSurface(quadratic(grid), grid, hessian_mult=4)
    assert np.allclose(surface.hessian_at((0.1, -0.2)), 2 * M, atol=1e-8)


def test_surface_interpolation():
    grid = unit_box_grid()
    u = quadratic(grid)
    u[:, :4] = np.inf
    surface = QuasiPotentialSurface(u, grid)
    assert surface.value_at((0.0, 0.0)) == pytest.approx(0.0, abs=1e-12)
    assert surface.is_accepted((0.2, 0.3))
    assert not surface.is_accepted((-0.95, 0.0))
    assert not surface.is_accepted((5.0, 0.0))


def test_map_of_gradient_system_is_straight():
    model = gradient_test_model()
    grid = unit_box_grid(65)
    u = quadratic(grid, np.eye(2))
    start = np.array([0.8, 0.3])
    trace = trace_map(u, model, start, grid)
    assert trace.status == "success"
    assert np.allclose(trace.path.start, start)
    assert np.linalg.norm(trace.path.end) <= 2 * grid.h
    direction = start / np.linalg.norm(start)
    offsets = np.abs(trace.path.vertices[:, 0] * direction[1] - trace.path.vertices[:, 1] * direction[0])
    assert offsets.max() <= 2 * grid.h


def test_map_start_outside_accepted_region():
    model = gradient_test_model()
    grid = unit_box_grid()
    u = quadratic(grid, np.eye(2))
    u[:, :4] = np.inf
    with pytest.raises(PathTracingError):
        trace_map(u, model, (-0.95, 0.0), grid)
    with pytest.raises(PathTracingError):
        trace_map(u, model, (2.0, 0.0), grid)


def test_map_hitting_uncomputed_region_reports_status():
    model = gradient_test_model()
    grid = unit_box_grid(65)
    u = quadratic(grid, np.eye(2))
    X, _ = grid.mesh()
    u[np.abs(X) < 0.3] = np.inf
    trace = trace_map(u, model, (0.8, 0.0), grid)
    assert trace.status == "left_region"
    assert trace.path.end[0] > 0.25


def test_polar_map_from_saddle():
    model = polar_test_model()
    grid = Grid.square(129, model.default_domain)
    X, Y = grid.mesh()
    surface = QuasiPotentialSurface(model.exact_u_field(X, Y), grid)
    lam, e = unstable_direction(model, (-3.0, 0.0))
    assert lam > 0 and np.linalg.norm(e) == pytest.approx(1.0)
    trace = map_from_saddle(surface, model, (-3.0, 0.0))
    assert trace.status == "success"
    assert np.allclose(trace.path.end, [-3.0, 0.0])
    assert np.linalg.norm(trace.path.start - np.array([3.0, 0.0])) <= 2 * grid.h
    assert surface.value_at(trace.path.vertices[1]) < surface.value_at(trace.path.vertices[-2])


def test_map_endpoint_is_stable_under_step_halving():
    model = polar_test_model()
    grid = Grid.square(129, model.default_domain)
    X, Y = grid.mesh()
    surface = QuasiPotentialSurface(model.exact_u_field(X, Y), grid)
    ends = []
    for step in (grid.h / 2, grid.h / 4):
        trace = trace_map(surface, model, (0.0, 3.0), grid, step=step)
        assert trace.status == "success"
        ends.append(trace.path.end)
    assert np.linalg.norm(ends[0] - ends[1]) < grid.h


def test_unstable_direction_rejects_stable_point():
    with pytest.raises(NotASaddleError):
        unstable_direction(gradient_test_model(), (0.0, 0.0))
    lam, e = unstable_direction(maier_stein_model(), (0.0, 0.0))
    assert lam == pytest.approx(1.0)
    assert abs(e[0]) == pytest.approx(1.0)


def test_hj_residual_vanishes_for_exact_solution():
    model = gradient_test_model()
    grid = unit_box_grid()
    r = hj_residual(quadratic(grid, np.eye(2)), model, grid)
    assert np.nanmax(np.abs(r)) < 1e-10
    zero = hj_residual(np.zeros(grid.shape), model, grid)
    assert np.allclose(zero, 0.0)


def test_hj_residual_decays_quadratically():
    model = polar_test_model()
    worst = []
    for N in (65, 129, 257):
        grid = Grid.square(N, model.default_domain)
        X, Y = grid.mesh()
        ring = (np.hypot(X, Y) > 1.0) & (np.hypot(X, Y) < 3.5)
        r = hj_residual(model.exact_u_field(X, Y), model, grid)
        worst.append(np.max(np.abs(r[ring])))
    assert worst[0] / worst[1] > 3.0
    assert worst[1] / worst[2] > 3.0


def test_decomposition_of_gradient_system():
    model = gradient_test_model()
    grid = unit_box_grid()
    parts = decompose_field(quadratic(grid, np.eye(2)), model, grid)
    assert np.allclose(parts.l1, 0.0, atol=1e-10) and np.allclose(parts.l2, 0.0, atol=1e-10)
    assert parts.metadata["identity_diffusion"]
    assert "caveat" not in parts.metadata
    with pytest.raises(ValueError):
        decompose_field(quadratic(grid), model, grid, convention="polar")


def test_polar_decomposition_conventions():
    model = polar_test_model()
    grid = Grid.square(129, model.default_domain)
    X, Y = grid.mesh()
    u = model.exact_u_field(X, Y)
    iso = decompose_field(u, model, grid)
    assert "caveat" in iso.metadata
    aniso = decompose_field(u, model, grid, convention="anisotropic")
    l1, l2 = model.rotational_field(X, Y)
    ring = (np.hypot(X, Y) > 1.0) & (np.hypot(X, Y) < 3.5)
    assert np.median(np.abs(aniso.l1[ring] - l1[ring])) < 5e-2
    assert np.median(np.abs(aniso.l2[ring] - l2[ring])) < 5e-2


def test_error_report():
    model = gradient_test_model()
    grid = unit_box_grid()
    X, Y = grid.mesh()
    u = X * X + Y * Y + 0.0025
    u[np.hypot(X, Y) > 0.9] = np.inf
    report = error_report(u, model, grid)
    assert report.max_abs == pytest.approx(0.0025)
    assert report.rms == pytest.approx(0.0025)
    assert report.n_valid_nodes == int(np.isfinite(u).sum())
    assert report.normalized_max_abs == pytest.approx(0.0025 / np.max(u[np.isfinite(u)]))
    assert report.to_record().startswith("max_abs=")
    with pytest.raises(MissingExactSolutionError):
        error_report(u, maier_stein_model(), grid)


def test_invariant_density():
    u = np.array([[0.0, 1.0, np.inf]])
    assert np.allclose(invariant_density(u, 0.5), [[1.0, np.exp(-2.0), 0.0]])
    with pytest.raises(ValueError):
        invariant_density(u, 0.0)


def main():
    print("🧪 Post-processing tests")
    print("=" * 50)
    code = pytest.main([__file__, "-q"])
    print("✅ All post-processing tests passed" if code == 0 else "❌ Post-processing tests failed")
    sys.exit(code)


if __name__ == "__main__":
    main()
