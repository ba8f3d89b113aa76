#!/usr/bin/env python3
"""
Tests for the Lambda Phage genetic toggle model
"""

import csv
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'services', 'olim'))

from app.errors import ModelDomainError
from app.models.base import fd_jacobian
from app.models.lambda_phage import (
    DEFAULT_PARAMS,
    LYSOGENIC_SEED,
    LYTIC_SEED,
    LambdaPhageModel,
    LambdaPhageParams,
    export_binding_table_csv,
    lambda_phage_dimers,
    lambda_phage_rates,
    lambda_phage_state_probabilities,
)


@pytest.fixture(scope="module")
def model():
    return LambdaPhageModel(diffusion="diagonal")


def test_binding_table_covers_all_states():
    params = LambdaPhageParams()
    assert len(params.states) == 27
    assert params.states[0] == "000" and params.states[-1] == "222"
    k = params.state_index("121")
    assert params.i_s[k] == 2 and params.j_s[k] == 1
    with pytest.raises(ValueError):
        LambdaPhageParams(binding={"000": 0.0})


def test_zero_counts_give_zero_dimers():
    ci, cro = lambda_phage_dimers(0.0, 0.0)
    assert ci == 0.0 and cro == 0.0
    ci, cro = lambda_phage_dimers([10.0, 200.0], [5.0, 50.0])
    assert np.all(ci > 0) and np.all(np.diff(ci) > 0)
    with pytest.raises(ModelDomainError):
        lambda_phage_dimers(-1.0, 0.0)


def test_dimer_formula_matches_direct_expression():
    # stable rewrite agrees with m/2 + e/8 - sqrt(m e/8 + e^2/64) where that is well conditioned
    n = 150.0
    m = n / (DEFAULT_PARAMS.V_cell * DEFAULT_PARAMS.N_A)
    e = np.exp(DEFAULT_PARAMS.dG_Cro / DEFAULT_PARAMS.RT)
    direct = m / 2 + e / 8 - np.sqrt(m * e / 8 + e * e / 64)
    _, cro = lambda_phage_dimers(0.0, n)
    assert cro == pytest.approx(direct, rel=1e-6)


def test_empty_operator_when_no_protein():
    P = lambda_phage_state_probabilities(0.0, 0.0)
    assert P[DEFAULT_PARAMS.state_index("000")] == pytest.approx(1.0)
    assert np.sum(P) == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(P) == 1


def test_probabilities_normalized():
    rng = np.random.default_rng(21)
    n_ci = rng.uniform(0, 250, 200)
    n_cro = rng.uniform(0, 250, 200)
    ci, cro = lambda_phage_dimers(n_ci, n_cro)
    P = lambda_phage_state_probabilities(ci, cro)
    assert P.shape == (27, 200)
    assert np.allclose(P.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(P >= 0)


def test_probabilities_follow_boltzmann_within_occupancy_class():
    params = DEFAULT_PARAMS
    P = lambda_phage_state_probabilities(1e-9, 1e-9)
    same_class = [s for s in params.states if s.count("1") == 1 and s.count("2") == 0]
    by_prob = sorted(same_class, key=lambda s: -P[params.state_index(s)])
    by_energy = sorted(same_class, key=lambda s: params.binding[s])
    assert by_prob == by_energy


def test_promoters_with_empty_operator():
    f_ci, f_cro = lambda_phage_rates(0.0, 0.0)
    assert f_ci == pytest.approx(DEFAULT_PARAMS.R_RM_u)
    assert f_cro == pytest.approx(DEFAULT_PARAMS.R_R)


def test_cro_promoter_blocked_by_or1_and_or2():
    # plenty of Cro: only states with OR1 and OR2 free keep P_R running
    ci, cro = lambda_phage_dimers(0.0, 203.0)
    P = lambda_phage_state_probabilities(ci, cro)
    free = sum(P[DEFAULT_PARAMS.state_index(s)] for s in ("000", "100", "200"))
    _, f_cro = lambda_phage_rates(0.0, 203.0)
    assert f_cro == pytest.approx(DEFAULT_PARAMS.R_R * free)
    assert 1e-3 < free < 2e-2


def test_published_points_are_near_equilibria():
    model = LambdaPhageModel(refine=False)
    p = DEFAULT_PARAMS
    for point in (LYSOGENIC_SEED, LYTIC_SEED):
        b = model.drift(point)
        decay = np.array([point[0] / p.tau_CI, point[1] / p.tau_Cro])
        assert np.all(np.abs(b) < 0.1 * decay)
    assert np.linalg.norm(model.drift((0.0, 0.0))) == pytest.approx(6.0, rel=1e-3)


def test_jacobian_on_the_cro_axis():
    model = LambdaPhageModel(refine=False)
    J = fd_jacobian(model.drift, (150.0, 0.0))
    assert np.all(np.isfinite(J))


def test_equilibria_are_refined(model):
    assert np.allclose(model.attractor.point, LYSOGENIC_SEED, atol=0.5)
    assert np.linalg.norm(model.drift(model.attractor.point)) < 1e-3
    assert np.allclose(model.lytic, LYTIC_SEED, atol=0.5)
    assert np.linalg.norm(model.drift(model.lytic)) < 1e-3


def test_drift_magnitude_range(model):
    xs = np.linspace(0, 250, 256)
    X, Y = np.meshgrid(xs, xs)
    b1, b2 = model.drift_field(X, Y)
    speed = np.hypot(b1, b2)
    assert 4.0 < speed.max() < 8.0
    assert speed.min() < 1e-2


def test_noise_amplitude_nonnegative_at_zero_ci(model):
    ys = np.linspace(0, 250, 11)
    g_ci, _ = model.noise_amplitudes(np.zeros_like(ys), ys)
    f_ci, _ = lambda_phage_rates(np.zeros_like(ys), ys)
    assert np.allclose(g_ci ** 2, DEFAULT_PARAMS.S_CI ** 2 * f_ci)
    assert np.all(g_ci >= 0)


def test_negative_counts_rejected(model):
    with pytest.raises(ModelDomainError):
        model.drift((-1.0, 10.0))
    b1, _ = model.drift_field(np.array([-1.0]), np.array([10.0]))
    assert np.isnan(b1[0])


def test_identity_diffusion_variant():
    model = LambdaPhageModel(diffusion="identity", refine=False)
    assert model.constant_diffusion
    assert np.allclose(model.covariance_inverse((100.0, 50.0)), np.eye(2))
    with pytest.raises(ValueError):
        LambdaPhageModel(diffusion="full", refine=False)


def test_jacobian_richardson_consistency(model):
    x = np.array([115.0, 19.0])
    J = fd_jacobian(model.drift, x)
    # half-step forward differences approach J at first order
    errs = []
    for step in (1e-2, 5e-3):
        Jf = np.column_stack([(model.drift(x + step * e) - model.drift(x)) / step for e in np.eye(2)])
        errs.append(np.max(np.abs(Jf - J)))
    assert errs[1] < 0.7 * errs[0]


def test_export_binding_table(tmp_path):
    path = export_binding_table_csv(str(tmp_path / "binding.csv"))
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 27
    row = next(r for r in rows if r["state"] == "222")
    assert float(row["G"]) == pytest.approx(-43.0)
    assert row["j_s"] == "3"


def main():
    print("🧪 Lambda Phage model tests")
    print("=" * 50)
    code = pytest.main([__file__, "-q"])
    print("✅ All Lambda Phage tests passed" if code == 0 else "❌ Lambda Phage tests failed")
    sys.exit(code)


if __name__ == "__main__":
    main()
