#!/usr/bin/env python3
"""
Tests for the ordered line integral solver: K rule, initialization and full sweeps
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'services', 'olim'))

from app.errors import InitializationError
from app.grid_core import Domain, Grid, Label, neighbors8
from app.models.limit_cycle import limit_cycle_model
from app.models.linear import LinearModel, gradient_test_model, linear_model
from app.models.polar import polar_test_model
from app.olim_solver import (
    BoundaryPolicy,
    SolverConfig,
    init_from_point_set,
    init_near_equilibrium,
    linear_quasipotential_matrix,
    rule_of_thumb_K,
    sample_midpoint_fields,
    solve,
)


def test_rule_of_thumb_K():
    assert rule_of_thumb_K(128) == 10
    assert rule_of_thumb_K(256) == 14
    assert rule_of_thumb_K(2048) == 26
    assert rule_of_thumb_K(4096) == 30
    with pytest.raises(ValueError):
        rule_of_thumb_K(64)


def test_solver_config_resolves_model_defaults():
    model = limit_cycle_model(n_samples=32)
    cfg = SolverConfig(N=65).resolve(model)
    assert cfg.shape == (65, 65)
    assert cfg.K == 10
    assert cfg.boundary_policy == BoundaryPolicy.COMPUTE_WHOLE_DOMAIN
    assert cfg.domain == model.default_domain
    assert cfg.init_radius_nodes == 10
    with pytest.raises(ValueError):
        SolverConfig(N=8)
    with pytest.raises(ValueError):
        SolverConfig(nx=32)


def test_quasipotential_matrix_of_gradient_system():
    qpm = linear_quasipotential_matrix(-np.eye(2), np.eye(2))
    assert np.allclose(qpm.M, np.eye(2), atol=1e-12)
    assert qpm.is_positive_definite


def test_quasipotential_matrix_identity_for_random_systems():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        J = rng.normal(size=(2, 2))
        J -= (np.max(np.linalg.eigvals(J).real) + rng.uniform(0.1, 2.0)) * np.eye(2)
        Sigma = rng.normal(size=(2, 2)) + 2.0 * np.eye(2)
        if abs(np.linalg.det(Sigma)) < 0.1:
            continue
        qpm = linear_quasipotential_matrix(J, Sigma)
        assert qpm.residual <= 1e-10
        assert qpm.is_positive_definite
        assert np.allclose(qpm.M, qpm.M.T)


def test_quasipotential_matrix_rejects_bad_input():
    with pytest.raises(InitializationError):
        linear_quasipotential_matrix(-np.eye(2), np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(InitializationError):
        linear_quasipotential_matrix(np.diag([1.0, -1.0]), np.eye(2))


def test_init_on_mesh_node():
    model = gradient_test_model()
    cfg = SolverConfig(N=65).resolve(model)
    grid = Grid(nx=65, ny=65, domain=cfg.domain)
    front = init_near_equilibrium(grid, model, cfg)
    assert len(front.front) == 1
    assert np.allclose(grid.position(front.front[0]), [0.0, 0.0])
    assert len(front.considered) == 8
    h2 = grid.h ** 2
    assert sorted(np.round(front.values / h2, 10)) == [1.0] * 4 + [2.0] * 4


def test_init_inside_cell():
    model = gradient_test_model()
    cfg = SolverConfig(N=64).resolve(model)
    grid = Grid(nx=64, ny=64, domain=cfg.domain)
    front = init_near_equilibrium(grid, model, cfg)
    assert len(front.front) == 0
    assert len(front.considered) == 4
    for node, value in zip(front.considered, front.values):
        assert value == pytest.approx(np.sum(grid.position(node) ** 2))


def test_init_rejects_attractor_outside_domain():
    model = gradient_test_model()
    cfg = SolverConfig(N=32, domain=Domain(xmin=1, xmax=2, ymin=1, ymax=2)).resolve(model)
    grid = Grid(nx=32, ny=32, domain=cfg.domain)
    with pytest.raises(InitializationError):
        init_near_equilibrium(grid, model, cfg)
    with pytest.raises(InitializationError):
        init_from_point_set(grid, model, cfg)


def test_init_from_point_set_stays_near_cycle():
    model = limit_cycle_model(n_samples=64)
    cfg = SolverConfig(N=41, K=3).resolve(model)
    grid = Grid(nx=41, ny=41, domain=cfg.domain)
    front = init_from_point_set(grid, model, cfg)
    assert front.considered.size > 0
    assert np.all(front.values >= 0)
    radius = 3 * grid.h
    for node in front.considered:
        r = np.hypot(*grid.position(node))
        assert abs(r - 1.0) <= radius + 1e-9


def test_midpoint_lattice_shape():
    model = polar_test_model()
    grid = Grid(nx=17, ny=17, domain=model.default_domain)
    fields = sample_midpoint_fields(model, grid)
    assert fields.b1.shape == (33 * 33,)
    assert not fields.constant_a
    assert fields.anisotropy_ratio() >= 1.0
    const = sample_midpoint_fields(gradient_test_model(), grid)
    assert const.constant_a and const.a11.shape == (1,)


@pytest.fixture(scope="module")
def gradient_solution():
    return solve(gradient_test_model(), SolverConfig(N=65, boundary_policy=BoundaryPolicy.COMPUTE_WHOLE_DOMAIN))


def test_gradient_system_matches_exact_solution(gradient_solution):
    result = gradient_solution
    X, Y = result.grid.mesh()
    inside = np.hypot(X, Y) <= 0.9
    assert result.valid[inside].all()
    assert np.max(np.abs(result.u[inside] - (X * X + Y * Y)[inside])) < 1e-2


def test_accept_order_is_monotone(gradient_solution):
    values = gradient_solution.accepted_values
    assert values[0] == 0.0
    assert np.all(np.diff(values) >= 0.0)


def test_whole_domain_policy_accepts_everything(gradient_solution):
    result = gradient_solution
    assert result.termination == "exhausted"
    assert result.valid.all()
    assert np.all(np.isinf(result.tentative))
    assert result.stats["heap_pops"] > 0
    assert result.summary()["accepted"] == result.grid.n_nodes


def test_stop_on_boundary_policy():
    result = solve(gradient_test_model(), SolverConfig(N=33))
    assert result.termination == "boundary"
    assert result.grid.is_boundary(int(result.accept_order[-1]))
    assert not result.valid.all()
    assert np.all(np.isinf(result.u[~result.valid]))
    considered = result.label == Label.CONSIDERED
    assert np.all(np.isfinite(result.tentative[considered]))


def test_scaled_identity_noise_scales_the_solution():
    base = solve(gradient_test_model(), SolverConfig(N=33, K=4))
    scaled = solve(LinearModel(J=-np.eye(2), sigma=2.0 * np.eye(2)), SolverConfig(N=33, K=4))
    valid = base.valid & scaled.valid
    assert valid.sum() > 100
    assert np.allclose(scaled.u[valid], base.u[valid] / 4.0, rtol=1e-10, atol=1e-14)


def test_repeated_solves_are_bit_identical():
    model = linear_model(alpha=np.pi / 5, gamma=2.0)
    config = SolverConfig(N=33, K=6, boundary_policy=BoundaryPolicy.COMPUTE_WHOLE_DOMAIN)
    first = solve(model, config)
    second = solve(model, config)
    assert np.array_equal(first.u, second.u)
    assert np.array_equal(first.accept_order, second.accept_order)
    assert np.array_equal(first.label, second.label)


class SampledIdentityModel(LinearModel):
    """sigma = I, but A sampled at every midpoint"""

    constant_diffusion = False


class HardIdentityModel(SampledIdentityModel):
    def covariance_inverse_field(self, X, Y):
        ones = np.ones_like(np.asarray(X, dtype=float))
        return ones, np.zeros_like(ones), ones


def test_identity_noise_reduces_to_isotropic_solver():
    config = SolverConfig(N=33, K=6, boundary_policy=BoundaryPolicy.COMPUTE_WHOLE_DOMAIN)
    sampled = solve(SampledIdentityModel(sigma=np.eye(2)), config)
    hard = solve(HardIdentityModel(sigma=np.eye(2)), config)
    constant = solve(LinearModel(sigma=np.eye(2)), config)
    assert sampled.valid.all() and hard.valid.all()
    assert np.allclose(sampled.u, hard.u, rtol=0, atol=1e-12)
    assert np.allclose(constant.u, hard.u, rtol=0, atol=1e-12)


def test_label_transitions_replay():
    result = solve(linear_model(alpha=np.pi / 4, gamma=2.0), SolverConfig(N=33, K=6))
    grid = result.grid
    label = result.label.ravel()
    order = result.accept_order
    assert len(set(order.tolist())) == order.size
    assert set(order.tolist()) == set(np.flatnonzero(label >= Label.ACCEPTED_FRONT).tolist())
    accepted = set(order.tolist())
    # the node that ended a StopOnBoundary run never had its neighbors updated
    for node in order[:-1]:
        assert all(label[y] >= Label.CONSIDERED for y in neighbors8(grid, int(node)))
    for node in np.flatnonzero(label == Label.ACCEPTED):
        assert all(label[y] >= Label.ACCEPTED_FRONT for y in neighbors8(grid, int(node)))
    for node in np.flatnonzero(label == Label.CONSIDERED):
        assert np.isfinite(result.tentative.ravel()[node])
        assert any(y in accepted for y in neighbors8(grid, int(node)))
    assert np.all(np.diff(result.accepted_values) >= 0.0)


def test_error_decreases_under_refinement():
    model = linear_model(alpha=np.pi / 4, gamma=2.0)
    errors = []
    for N in (33, 65, 129):
        result = solve(model, SolverConfig(N=N, K=rule_of_thumb_K(128)))
        X, Y = result.grid.mesh()
        exact = model.exact_u_field(X, Y)
        errors.append(np.max(np.abs(result.u[result.valid] - exact[result.valid])))
    assert errors[1] < errors[0]
    assert errors[2] < errors[1]


def test_anisotropic_linear_solve_tracks_quadratic_form():
    model = linear_model(alpha=np.pi / 4, gamma=2.0)
    result = solve(model, SolverConfig(N=129))
    X, Y = result.grid.mesh()
    exact = model.exact_u_field(X, Y)
    valid = result.valid
    assert valid.sum() > 1000
    assert np.median(np.abs(result.u[valid] - exact[valid])) < 1e-2


def test_polar_solve_is_nonnegative_and_bounded():
    model = polar_test_model()
    result = solve(model, SolverConfig(N=129))
    assert result.termination == "boundary"
    assert result.anisotropy_ratio > 1.0
    u = result.u[result.valid]
    assert u.min() >= 0.0
    X, Y = result.grid.mesh()
    exact = model.exact_u_field(X, Y)
    assert np.median(np.abs(u - exact[result.valid])) < 5e-2


def main():
    print("🧪 OLIM solver tests")
    print("=" * 50)
    code = pytest.main([__file__, "-q"])
    print("✅ All solver tests passed" if code == 0 else "❌ Solver tests failed")
    sys.exit(code)


if __name__ == "__main__":
    main()
