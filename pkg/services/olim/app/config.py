"""
Run configuration: flat dotted key = value files, CLI overrides and the
QPOT_OUTPUT_DIR environment override.

    model.name = polar
    model.alpha = 0.3927
    solver.N = 512
    solver.domain = -3.8, 4.2, -4, 4
    outputs.error_report = true
    outputs.map_seeds = 1.5:2.0, -2.5:0.5
"""

import logging
import os
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError
from .models import MODELS
from .models.base import Model
from .olim_solver import SolverConfig

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "QPOT_OUTPUT_DIR"
SECTIONS = ("model", "solver", "outputs", "rate", "sweep")


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _split_pairs(value):
    if isinstance(value, str):
        pairs = []
        for item in _split_list(value):
            parts = item.split(":")
            if len(parts) != 2:
                raise ValueError(f"expected x:y, got '{item}'")
            pairs.append((float(parts[0]), float(parts[1])))
        return pairs
    return value


def _scalar(text: str) -> Any:
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


class OutputsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str = "output"
    u_field: bool = True
    labels: bool = True
    u_csv: bool = False
    gradient: bool = False
    residual: bool = False
    decomposition: bool = False
    decomposition_convention: Literal["isotropic", "anisotropic"] = "isotropic"
    error_report: bool = False
    density: bool = False
    density_epsilon: float = Field(default=1.0, gt=0)
    map_seeds: List[Tuple[float, float]] = []
    map_from_saddles: bool = False

    @field_validator("map_seeds", mode="before")
    @classmethod
    def _pairs(cls, v):
        return _split_pairs(v)


class RateConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = False
    epsilon: float = Field(default=1.0, gt=0)
    saddle: Optional[Tuple[float, float]] = None
    hessian_stencil_mult: int = Field(default=4, ge=1)

    @field_validator("saddle", mode="before")
    @classmethod
    def _saddle(cls, v):
        return _split_list(v)


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    N: List[int] = [128, 256, 512, 1024]
    K: Union[Literal["rule"], List[int]] = "rule"
    alpha: List[float] = [0.0]
    gamma: List[float] = [1.0]
    workers: int = Field(default=1, ge=1)

    @field_validator("N", "alpha", "gamma", mode="before")
    @classmethod
    def _lists(cls, v):
        return _split_list(v)

    @field_validator("K", mode="before")
    @classmethod
    def _k_list(cls, v):
        if isinstance(v, str) and v.strip() != "rule":
            return _split_list(v)
        return v.strip() if isinstance(v, str) else v


class RunConfig(BaseModel):
    """Everything one invocation needs; to_text() re-parses to an equal config"""

    model_config = ConfigDict(extra="forbid")

    model: str = "polar"
    model_params: Dict[str, Union[bool, int, float, str]] = {}
    solver: SolverConfig = SolverConfig(N=256)
    outputs: OutputsConfig = OutputsConfig()
    rate: RateConfig = RateConfig()
    sweep: SweepConfig = SweepConfig()

    @field_validator("model")
    @classmethod
    def _registered(cls, v):
        if v not in MODELS:
            raise ValueError(f"unknown model '{v}'; registered models: {', '.join(sorted(MODELS))}")
        return v

    @field_validator("solver", mode="before")
    @classmethod
    def _solver_domain(cls, v):
        if isinstance(v, dict) and isinstance(v.get("domain"), str):
            bounds = [float(b) for b in _split_list(v["domain"])]
            if len(bounds) != 4:
                raise ValueError("solver.domain needs xmin, xmax, ymin, ymax")
            v = dict(v, domain=dict(zip(("xmin", "xmax", "ymin", "ymax"), bounds)))
        return v

    def check_model(self, model: Model):
        if self.outputs.error_report and not model.has_exact_u:
            raise ConfigError(f"model '{self.model}' has no exact solution; error outputs unavailable")

    def to_text(self) -> str:
        lines = [f"model.name = {self.model}"]
        lines += [f"model.{k} = {_format(v)}" for k, v in self.model_params.items()]
        solver = self.solver.model_dump(exclude_none=True)
        domain = solver.pop("domain", None)
        for key in solver:
            lines.append(f"solver.{key} = {_format(getattr(self.solver, key))}")
        if domain is not None:
            lines.append(f"solver.domain = {_format(list(self.solver.domain.as_tuple()))}")
        for section in ("outputs", "rate", "sweep"):
            for key, value in getattr(self, section).model_dump(exclude_none=True).items():
                if key == "map_seeds":
                    text = ", ".join(f"{x!r}:{y!r}" for x, y in value)
                    if not text:
                        continue
                else:
                    text = _format(value)
                lines.append(f"{section}.{key} = {text}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> Dict[str, Dict[str, str]]:
    """Flat dotted lines to {section: {key: raw string}}"""
    tree: Dict[str, Dict[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        _set_dotted(tree, key, value, where=f"line {lineno}")
    return tree


def _set_dotted(tree: Dict[str, Dict[str, str]], key: str, value: str, where: str = "override"):
    section, dot, name = key.partition(".")
    if not dot or not name or section not in SECTIONS:
        raise ConfigError(f"{where}: key '{key}' must be <section>.<name> with section in {', '.join(SECTIONS)}")
    tree.setdefault(section, {})[name] = value


def apply_overrides(tree: Dict[str, Dict[str, str]], overrides: Iterable[str]) -> Dict[str, Dict[str, str]]:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like section.key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        _set_dotted(tree, key, value)
    return tree


def build_config(tree: Dict[str, Dict[str, str]]) -> RunConfig:
    model_section = dict(tree.get("model", {}))
    data: Dict[str, Any] = {}
    if "name" in model_section:
        data["model"] = model_section.pop("name")
    data["model_params"] = {k: _scalar(v) for k, v in model_section.items()}
    for section in ("solver", "outputs", "rate", "sweep"):
        if section in tree:
            data[section] = dict(tree[section])
    if "solver" in data and "N" not in data["solver"] and "nx" not in data["solver"]:
        data["solver"].setdefault("N", "256")
    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}")


def load_config(path: Optional[str] = None, overrides: Iterable[str] = (), use_env: bool = True) -> RunConfig:
    tree: Dict[str, Dict[str, str]] = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                tree = parse_config_text(fh.read())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
    apply_overrides(tree, overrides)
    config = build_config(tree)
    if use_env:
        load_dotenv()
        env_dir = os.getenv(OUTPUT_DIR_ENV)
        if env_dir:
            logger.info(f"Output directory overridden by {OUTPUT_DIR_ENV}={env_dir}")
            config = config.model_copy(update={"outputs": config.outputs.model_copy(update={"dir": env_dir})})
    return config
