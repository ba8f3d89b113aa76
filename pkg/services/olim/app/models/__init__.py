"""
Concrete models and the name -> factory registry used by the CLI
"""

from typing import Dict

from ..errors import ConfigError
from .base import (
    AttractorKind,
    AttractorSpec,
    Model,
    ModelInfo,
    build_rotation_scaled_sigma,
    covariance_inverse,
    fd_jacobian,
    refine_equilibrium,
)
from .lambda_phage import (
    LambdaPhageModel,
    LambdaPhageParams,
    export_binding_table_csv,
    lambda_phage_dimers,
    lambda_phage_model,
    lambda_phage_state_probabilities,
)
from .limit_cycle import LimitCycleModel, limit_cycle_model
from .linear import LinearModel, gradient_test_model, linear_model
from .maier_stein import MaierSteinModel, maier_stein_model
from .polar import PolarTestModel, polar_test_model

MODELS: Dict[str, ModelInfo] = {
    "linear": ModelInfo("linear", linear_model, "b = Jx with constant Sigma(alpha, gamma)", ("alpha", "gamma")),
    "polar": ModelInfo("polar", polar_test_model, "nonlinear test with polar-coordinate diffusion"),
    "maier_stein": ModelInfo("maier_stein", maier_stein_model, "Maier-Stein field, Sigma(alpha, gamma)",
                             ("alpha", "gamma")),
    "lambda_phage": ModelInfo("lambda_phage", lambda_phage_model, "genetic toggle switch of Lambda Phage",
                              ("diffusion",)),
    "limit_cycle": ModelInfo("limit_cycle", limit_cycle_model, "stable limit cycle on the unit circle",
                             ("omega", "n_samples")),
}


def get_model(name: str, **params) -> Model:
    """Build a registered model, rejecting unknown names and parameters"""
    info = MODELS.get(name)
    if info is None:
        raise ConfigError(f"unknown model '{name}'; registered models: {', '.join(sorted(MODELS))}")
    unknown = sorted(set(params) - set(info.parameters))
    if unknown:
        raise ConfigError(f"model '{name}' does not take parameter(s) {unknown}; "
                          f"accepted: {list(info.parameters)}")
    try:
        return info.factory(**params)
    except ValueError as e:
        raise ConfigError(f"invalid parameters for model '{name}': {e}")


__all__ = [
    "AttractorKind", "AttractorSpec", "Model", "MODELS", "get_model",
    "build_rotation_scaled_sigma", "covariance_inverse", "fd_jacobian", "refine_equilibrium",
    "LinearModel", "linear_model", "gradient_test_model",
    "PolarTestModel", "polar_test_model",
    "MaierSteinModel", "maier_stein_model",
    "LambdaPhageModel", "LambdaPhageParams", "lambda_phage_model", "lambda_phage_dimers",
    "lambda_phage_state_probabilities", "export_binding_table_csv",
    "LimitCycleModel", "limit_cycle_model",
]
