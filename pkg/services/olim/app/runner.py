"""
Run orchestration: one solve with its requested outputs, and convergence
studies over mesh size, update factor and diffusion parameters.
"""

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigError, QpotError, RateNotApplicableError
from .field_io import (
    FieldRecord,
    atomic_open,
    file_sha256,
    list_outputs,
    read_field,
    write_field,
    write_field_csv,
    write_pair_field,
    write_path_csv,
    write_text,
)
from .grid_core import Label
from .models import MODELS, get_model
from .models.base import AttractorKind, Model
from .monitoring import RunMetrics, get_system_health
from .olim_solver import SolveResult, SolverConfig, rule_of_thumb_K, solve
from .postproc import (
    QuasiPotentialSurface,
    decompose_field,
    error_field,
    error_report,
    gradient_field,
    hj_residual,
    invariant_density,
    map_from_saddle,
    trace_map,
)
from .rates import estimate_rate, find_saddle

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SWEEP_COLUMNS = ("N", "K", "alpha", "gamma", "normalized_max_error", "rms_error", "max_abs_error",
                 "wall_time", "status", "message")
FIT_COLUMNS = ("alpha", "gamma", "K", "n_points", "C", "p", "status")


@contextmanager
def _stage(metrics: RunMetrics, name: str) -> Iterator[None]:
    """Time a stage and tag any solver error with the stage name"""
    metrics.start_stage(name)
    try:
        yield
    except QpotError as e:
        e.stage = name
        raise
    finally:
        metrics.end_stage(name)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


@dataclass
class RunManifest:
    config: str
    version: str
    timings: Dict[str, Any]
    stats: Dict[str, Any]
    files: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    model: Dict[str, Any] = field(default_factory=dict)
    system: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=False)

    @classmethod
    def load(cls, path: str) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def verify(self, directory: str) -> bool:
        """True when every listed file exists with the recorded checksum"""
        for entry in self.files:
            full = os.path.join(directory, entry["name"])
            if not os.path.exists(full) or file_sha256(full) != entry["sha256"]:
                return False
        return True


def write_manifest(directory: str, config: RunConfig, metrics: RunMetrics,
                   summary: Optional[Dict[str, Any]] = None, model: Optional[Model] = None) -> RunManifest:
    files = [
        {"name": name, "sha256": file_sha256(os.path.join(directory, name)),
         "bytes": os.path.getsize(os.path.join(directory, name))}
        for name in list_outputs(directory) if name != MANIFEST_NAME
    ]
    manifest = RunManifest(
        config=config.to_text(),
        version=__version__,
        timings=metrics.timings(),
        stats=metrics.stats(),
        files=files,
        summary=summary or {},
        model=model.describe() if model is not None else {},
        system=get_system_health(),
    )
    write_text(os.path.join(directory, MANIFEST_NAME), manifest.to_json())
    logger.info(f"Manifest written with {len(files)} file(s) to {directory}")
    return manifest


def build_model(config: RunConfig) -> Model:
    return get_model(config.model, **config.model_params)


def load_solution(path: str, model: Model, solver: SolverConfig) -> SolveResult:
    """Wrap a previously written u field so MAP tracing and rates can reuse it"""
    record: FieldRecord = read_field(path)
    if record.is_pair:
        raise ConfigError(f"{path} holds a vector field, expected the scalar u field")
    grid = record.grid
    u = record.data.copy()
    finite = np.isfinite(u)
    label = np.where(finite, Label.ACCEPTED, Label.UNKNOWN).astype(np.int8)
    flat = u.ravel()
    order = np.flatnonzero(np.isfinite(flat))
    order = order[np.argsort(flat[order], kind="stable")]
    cfg = solver.model_copy(update={"N": None, "nx": grid.nx, "ny": grid.ny, "domain": grid.domain}).resolve(model)
    attractor = model.attractor.point if model.attractor.kind == AttractorKind.STABLE_POINT else None
    return SolveResult(u=u, label=label, accept_order=order, stats={}, tentative=np.full(grid.shape, np.inf),
                       termination="loaded", grid=grid, config=cfg, attractor=attractor)


def _write_outputs(result: SolveResult, model: Model, config: RunConfig, out_dir: str):
    outputs = config.outputs
    grid = result.grid

    def path(name):
        return os.path.join(out_dir, name)

    if outputs.u_field:
        write_field(path("u.qpf"), result.u, grid)
    if outputs.labels:
        write_field(path("labels.qpf"), result.label.astype(np.float64), grid)
    if outputs.u_csv:
        write_field_csv(path("u.csv"), result.u, grid)
    if outputs.gradient:
        grad = gradient_field(result, grid)
        write_pair_field(path("gradient.qpf"), grad.gx, grad.gy, grid)
    if outputs.residual:
        write_field(path("residual.qpf"), hj_residual(result, model, grid), grid)
    if outputs.decomposition:
        parts = decompose_field(result, model, grid, convention=outputs.decomposition_convention)
        write_pair_field(path("decomposition.qpf"), parts.l1, parts.l2, grid)
        if "caveat" in parts.metadata:
            logger.warning(f"Decomposition: {parts.metadata['caveat']}")
    if outputs.density:
        write_field(path("density.qpf"), invariant_density(result, outputs.density_epsilon), grid)


def _write_error_outputs(result: SolveResult, model: Model, out_dir: str) -> Dict[str, Any]:
    grid = result.grid
    write_field(os.path.join(out_dir, "error.qpf"), error_field(result, model, grid), grid)
    report = error_report(result, model, grid)
    write_text(os.path.join(out_dir, "error_report.txt"), report.to_record())
    logger.info(f"Error report: max={report.max_abs:.4g}, rms={report.rms:.4g}, "
                f"normalized={report.normalized_max_abs:.4g}")
    return asdict(report)


def _write_maps(result: SolveResult, model: Model, config: RunConfig, out_dir: str) -> int:
    outputs = config.outputs
    surface = QuasiPotentialSurface(result, result.grid, hessian_mult=config.rate.hessian_stencil_mult)
    written = 0
    for k, seed in enumerate(outputs.map_seeds):
        trace = trace_map(surface, model, seed, result.grid)
        write_path_csv(trace.path.reversed(), os.path.join(out_dir, f"map_{k}.csv"))
        written += 1
    if outputs.map_from_saddles:
        for k, seed in enumerate(model.known_saddles):
            saddle = find_saddle(model, seed)
            trace = map_from_saddle(surface, model, saddle)
            write_path_csv(trace.path, os.path.join(out_dir, f"map_saddle_{k}.csv"))
            written += 1
    return written


def run_single(config: RunConfig, field_path: Optional[str] = None) -> RunManifest:
    """Solve (or load u), write the requested outputs, then the manifest"""
    metrics = RunMetrics()
    out_dir = config.outputs.dir
    os.makedirs(out_dir, exist_ok=True)
    summary: Dict[str, Any] = {}

    with _stage(metrics, "config"):
        model = build_model(config)
        config.check_model(model)
    if config.rate.enabled and not model.rate_applicable:
        with _stage(metrics, "rate"):
            raise RateNotApplicableError(f"rate formula refused for '{model.name}': {model.rate_note}")

    if field_path:
        with _stage(metrics, "io"):
            result = load_solution(field_path, model, config.solver)
    else:
        with _stage(metrics, "solve"):
            result = solve(model, config.solver)
        metrics.record_counters({k: v for k, v in result.stats.items() if k != "wall_time"})
    summary["solve"] = result.summary()

    with _stage(metrics, "postproc"):
        _write_outputs(result, model, config, out_dir)
        if config.outputs.error_report:
            summary["error"] = _write_error_outputs(result, model, out_dir)

    if config.outputs.map_seeds or config.outputs.map_from_saddles:
        with _stage(metrics, "map"):
            summary["maps"] = _write_maps(result, model, config, out_dir)

    if config.rate.enabled:
        with _stage(metrics, "rate"):
            estimate = estimate_rate(model, result, saddle_seed=config.rate.saddle,
                                     epsilon=config.rate.epsilon,
                                     hessian_stencil_mult=config.rate.hessian_stencil_mult)
            write_text(os.path.join(out_dir, "rate.txt"), estimate.to_record())
            summary["rate"] = estimate.to_dict()

    return write_manifest(out_dir, config, metrics, summary=summary, model=model)


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

@dataclass
class PowerLawFit:
    alpha: Optional[float]
    gamma: Optional[float]
    K: Optional[int]
    n_points: int
    C: float = float("nan")
    p: float = float("nan")
    status: str = "ok"


def fit_power_law(Ns: List[int], errors: List[float]) -> Tuple[float, float]:
    """Least-squares fit of E = C N^-p in log-log space; needs three mesh sizes"""
    Ns_arr = np.asarray(Ns, dtype=float)
    E = np.asarray(errors, dtype=float)
    if np.unique(Ns_arr).size < 3:
        raise ValueError(f"power-law fit needs at least 3 distinct N, got {np.unique(Ns_arr).size}")
    if np.any(E <= 0) or not np.all(np.isfinite(E)):
        raise ValueError("power-law fit needs positive finite errors")
    slope, intercept = np.polyfit(np.log(Ns_arr), np.log(E), 1)
    return float(np.exp(intercept)), float(-slope)


def _sweep_tasks(config: RunConfig) -> List[Dict[str, Any]]:
    sweep = config.sweep
    takes_sigma = "alpha" in MODELS[config.model].parameters
    sigmas = list(product(sweep.alpha, sweep.gamma)) if takes_sigma else [(None, None)]
    tasks = []
    for N, (alpha, gamma) in product(sweep.N, sigmas):
        Ks = [rule_of_thumb_K(max(N, 128))] if sweep.K == "rule" else list(sweep.K)
        for K in Ks:
            params = dict(config.model_params)
            if takes_sigma:
                params.update(alpha=alpha, gamma=gamma)
            tasks.append({
                "model": config.model,
                "params": params,
                "solver": config.solver.model_copy(update={"N": N, "nx": None, "ny": None, "K": K}).model_dump(),
                "N": N, "K": K, "alpha": alpha, "gamma": gamma,
            })
    return tasks


def run_sweep_row(task: Dict[str, Any]) -> Dict[str, Any]:
    """One (N, K, alpha, gamma) solve; failures become a marked row"""
    row = {key: task[key] for key in ("N", "K", "alpha", "gamma")}
    try:
        model = get_model(task["model"], **task["params"])
        result = solve(model, SolverConfig(**task["solver"]))
        report = error_report(result, model, result.grid)
        row.update(normalized_max_error=report.normalized_max_abs, rms_error=report.rms,
                   max_abs_error=report.max_abs, wall_time=result.stats["wall_time"],
                   status="ok", message="")
    except (QpotError, ValueError) as e:
        logger.error(f"❌ Sweep row N={task['N']} K={task['K']} failed: {e}")
        row.update(normalized_max_error=float("nan"), rms_error=float("nan"), max_abs_error=float("nan"),
                   wall_time=float("nan"), status="failed", message=str(e).replace("\n", " "))
    return row


def fit_rows(rows: List[Dict[str, Any]], per_K: bool) -> List[PowerLawFit]:
    groups: Dict[Tuple, List[Dict[str, Any]]] = {}
    for row in rows:
        key = (row["alpha"], row["gamma"], row["K"] if per_K else None)
        groups.setdefault(key, []).append(row)
    fits = []
    for (alpha, gamma, K), members in groups.items():
        ok = [r for r in members if r["status"] == "ok"]
        fit = PowerLawFit(alpha=alpha, gamma=gamma, K=K, n_points=len(ok))
        try:
            fit.C, fit.p = fit_power_law([r["N"] for r in ok], [r["normalized_max_error"] for r in ok])
        except ValueError as e:
            fit.status = "refused"
            logger.warning(f"Power-law fit refused for alpha={alpha}, gamma={gamma}: {e}")
        fits.append(fit)
    return fits


@dataclass
class SweepReport:
    rows: List[Dict[str, Any]]
    fits: List[PowerLawFit]
    manifest: Optional[RunManifest] = None


def _csv_text(columns, records) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for record in records:
        writer.writerow({k: ("" if record[k] is None else
                             repr(record[k]) if isinstance(record[k], float) else record[k]) for k in columns})
    return buffer.getvalue()


def run_convergence_study(config: RunConfig) -> SweepReport:
    """Rows of normalized max / RMS error and wall time, plus E = C N^-p fits"""
    metrics = RunMetrics()
    out_dir = config.outputs.dir
    os.makedirs(out_dir, exist_ok=True)

    with _stage(metrics, "config"):
        model = build_model(config)
        if not model.has_exact_u:
            raise ConfigError(f"convergence study needs an exact solution; '{model.name}' has none")
        tasks = _sweep_tasks(config)
    logger.info(f"🔧 Convergence study of '{model.name}': {len(tasks)} solve(s), "
                f"{config.sweep.workers} worker(s)")

    with _stage(metrics, "solve"):
        if config.sweep.workers > 1:
            with ProcessPoolExecutor(max_workers=config.sweep.workers) as pool:
                rows = list(pool.map(run_sweep_row, tasks))
        else:
            rows = [run_sweep_row(task) for task in tasks]

    fits = fit_rows(rows, per_K=config.sweep.K != "rule")
    with _stage(metrics, "io"):
        with atomic_open(os.path.join(out_dir, "sweep.csv"), "w") as fh:
            fh.write(_csv_text(SWEEP_COLUMNS, rows))
        with atomic_open(os.path.join(out_dir, "sweep_fit.csv"), "w") as fh:
            fh.write(_csv_text(FIT_COLUMNS, [asdict(f) for f in fits]))

    failed = sum(r["status"] != "ok" for r in rows)
    metrics.record_counters({"rows": len(rows), "failed_rows": failed})
    for fit in fits:
        if fit.status == "ok":
            logger.info(f"✅ alpha={fit.alpha}, gamma={fit.gamma}: E = {fit.C:.4g} N^-{fit.p:.4f}")
    manifest = write_manifest(out_dir, config, metrics, summary={"rows": len(rows), "failed": failed},
                              model=model)
    return SweepReport(rows=rows, fits=fits, manifest=manifest)
