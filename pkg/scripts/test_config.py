#!/usr/bin/env python3
"""
Tests for config parsing, overrides and the output-directory environment override
"""

import glob
import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'services', 'olim'))

from app.config import OUTPUT_DIR_ENV, RunConfig, apply_overrides, build_config, load_config, parse_config_text
from app.errors import ConfigError
from app.models import get_model
from app.olim_solver import BoundaryPolicy

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', 'data', 'configs')


def config_from(text, overrides=()):
    return build_config(apply_overrides(parse_config_text(text), overrides))


def test_parse_sections_and_comments():
    tree = parse_config_text("# header\n\nmodel.name = polar  # inline\nsolver.N=64\n")
    assert tree == {"model": {"name": "polar"}, "solver": {"N": "64"}}


def test_parse_errors():
    with pytest.raises(ConfigError):
        parse_config_text("solver.N 64\n")
    with pytest.raises(ConfigError):
        parse_config_text("mesh.N = 64\n")
    with pytest.raises(ConfigError):
        parse_config_text("N = 64\n")


def test_polar_config_file():
    config = load_config(os.path.join(CONFIG_DIR, "polar.conf"), use_env=False)
    assert config.model == "polar"
    assert config.solver.N == 512 and config.solver.K == 26
    assert config.outputs.error_report and config.outputs.residual
    assert config.outputs.map_seeds == [(2.0, 2.0), (-2.5, 0.5)]
    assert config.outputs.dir == "output/polar"
    assert not config.rate.enabled


def test_every_shipped_config_loads():
    paths = sorted(glob.glob(os.path.join(CONFIG_DIR, "*.conf")))
    assert len(paths) >= 5
    for path in paths:
        config = load_config(path, use_env=False)
        if config.outputs.error_report:
            config.check_model(get_model(config.model, **config.model_params))


def test_defaults():
    config = config_from("")
    assert config.model == "polar"
    assert config.solver.N == 256
    assert config.outputs.u_field and config.outputs.labels
    assert not config.outputs.u_csv
    assert config.sweep.K == "rule"
    assert config.sweep.N == [128, 256, 512, 1024]


def test_overrides_win_over_file_values():
    config = config_from("solver.N = 512\nsolver.K = 26\n", ["solver.K=12", "model.name=linear"])
    assert config.model == "linear"
    assert config.solver.K == 12
    assert config.solver.N == 512
    with pytest.raises(ConfigError):
        config_from("", ["solver.K"])


def test_solver_section_fields():
    config = config_from("solver.boundary_policy = ComputeWholeDomain\nsolver.domain = -2, 2, -1, 1\n")
    assert config.solver.N == 256
    assert config.solver.boundary_policy == BoundaryPolicy.COMPUTE_WHOLE_DOMAIN
    assert config.solver.domain.as_tuple() == (-2.0, 2.0, -1.0, 1.0)
    with pytest.raises(ConfigError):
        config_from("solver.domain = -2, 2, -1\n")
    with pytest.raises(ConfigError):
        config_from("solver.N = 8\n")
    with pytest.raises(ConfigError):
        config_from("solver.mesh = 8\n")


def test_sweep_section():
    config = config_from("sweep.N = 128, 256\nsweep.K = 10, 20\nsweep.gamma = 1, 2.5\n")
    assert config.sweep.N == [128, 256]
    assert config.sweep.K == [10, 20]
    assert config.sweep.gamma == [1.0, 2.5]
    assert config_from("sweep.K = rule\n").sweep.K == "rule"


def test_unknown_model_lists_registered_models():
    with pytest.raises(ConfigError) as exc:
        config_from("model.name = lorenz\n")
    message = str(exc.value)
    for name in ("linear", "polar", "maier_stein", "lambda_phage", "limit_cycle"):
        assert name in message


def test_model_params_are_typed():
    config = config_from("model.name = maier_stein\nmodel.alpha = 0.5\nmodel.gamma = 2\nmodel.note = x\n")
    assert config.model_params == {"alpha": 0.5, "gamma": 2, "note": "x"}


def test_error_report_needs_exact_solution():
    config = config_from("model.name = maier_stein\noutputs.error_report = true\n")
    with pytest.raises(ConfigError):
        config.check_model(get_model("maier_stein"))
    config_from("model.name = polar\noutputs.error_report = true\n").check_model(get_model("polar"))


def test_rate_section():
    config = config_from("rate.enabled = true\nrate.epsilon = 0.25\nrate.saddle = -3, 0\n")
    assert config.rate.enabled
    assert config.rate.saddle == (-3.0, 0.0)
    with pytest.raises(ConfigError):
        config_from("rate.epsilon = 0\n")


def test_text_round_trip():
    text = ("model.name = linear\nmodel.alpha = 0.3\nmodel.gamma = 2.0\n"
            "solver.N = 128\nsolver.domain = -1, 1, -1, 1\nsolver.boundary_policy = StopOnBoundary\n"
            "outputs.map_seeds = 0.5:0.25\noutputs.decomposition = true\n"
            "rate.saddle = 1, 2\nsweep.K = 10, 14\nsweep.gamma = 1, 2, 4\n")
    config = config_from(text)
    again = build_config(parse_config_text(config.to_text()))
    assert again == config
    assert RunConfig().to_text() == build_config(parse_config_text(RunConfig().to_text())).to_text()


def test_env_override(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "from_env"))
    config = load_config(None, ["outputs.dir=explicit"])
    assert config.outputs.dir == str(tmp_path / "from_env")
    config = load_config(None, ["outputs.dir=explicit"], use_env=False)
    assert config.outputs.dir == "explicit"


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.conf"))


def main():
    print("🧪 Config tests")
    print("=" * 50)
    code = pytest.main([__file__, "-q"])
    print("✅ All config tests passed" if code == 0 else "❌ Config tests failed")
    sys.exit(code)


if __name__ == "__main__":
    main()
