"""
Command line front end.

    qpot.py solve  --config data/configs/polar.conf --N 512
    qpot.py sweep  --config data/configs/linear_sweep.conf
    qpot.py map    --model polar --field output/u.qpf --set outputs.map_seeds=1.5:2.0
    qpot.py rate   --model lambda_phage --N 1024
    qpot.py export-tables --out output

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from .config import RunConfig, load_config
from .errors import ConfigError, QpotError
from .models.lambda_phage import export_binding_table_csv
from .monitoring import configure_logging
from .runner import run_convergence_study, run_single

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. solver.K=20 (repeatable)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--model", help="registered model name")
    parser.add_argument("--N", type=int, help="nodes per axis")
    parser.add_argument("--K", help="update factor, or 'rule' for sweeps")
    parser.add_argument("--log-dir", help="directory for qpot.log")
    parser.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpot", description="Quasi-potential solver for 2D SDEs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="compute U and the requested outputs")
    _add_common(p_solve)

    p_sweep = sub.add_parser("sweep", help="convergence study against an exact solution")
    _add_common(p_sweep)
    p_sweep.add_argument("--workers", type=int, help="worker processes")

    p_map = sub.add_parser("map", help="trace minimum action paths")
    _add_common(p_map)
    p_map.add_argument("--field", help="reuse a previously written u field")

    p_rate = sub.add_parser("rate", help="sharp transition rate through a saddle")
    _add_common(p_rate)
    p_rate.add_argument("--field", help="reuse a previously written u field")
    p_rate.add_argument("--epsilon", type=float, help="noise strength")

    p_tables = sub.add_parser("export-tables", help="dump the Lambda Phage binding table")
    p_tables.add_argument("--out", default="output", help="output directory")
    p_tables.add_argument("--log-dir", help="directory for qpot.log")
    p_tables.add_argument("--verbose", "-v", action="store_true")
    return parser


def _overrides(args: argparse.Namespace) -> List[str]:
    items = list(args.overrides)
    if args.model:
        items.append(f"model.name={args.model}")
    if args.out:
        items.append(f"outputs.dir={args.out}")
    if args.command == "sweep":
        if args.N:
            items.append(f"sweep.N={args.N}")
        if args.K:
            items.append(f"sweep.K={args.K}")
        if args.workers:
            items.append(f"sweep.workers={args.workers}")
    else:
        if args.N:
            items.append(f"solver.N={args.N}")
        if args.K:
            items.append(f"solver.K={args.K}")
    if args.command == "map":
        items += ["outputs.u_field=false", "outputs.labels=false"]
    if args.command == "rate":
        items += ["rate.enabled=true", "outputs.u_field=false", "outputs.labels=false"]
        if args.epsilon is not None:
            items.append(f"rate.epsilon={args.epsilon!r}")
    return items


def _map_config(config: RunConfig) -> RunConfig:
    if config.outputs.map_seeds:
        return config
    return config.model_copy(update={"outputs": config.outputs.model_copy(update={"map_from_saddles": True})})


def run(args: argparse.Namespace) -> int:
    if args.command == "export-tables":
        os.makedirs(args.out, exist_ok=True)
        path = export_binding_table_csv(os.path.join(args.out, "lambda_phage_binding.csv"))
        print(f"✅ Binding table written to {path}")
        return EXIT_OK

    # explicit --out wins over QPOT_OUTPUT_DIR
    config = load_config(args.config, _overrides(args), use_env=not args.out)
    if args.command == "sweep":
        report = run_convergence_study(config)
        failed = sum(r["status"] != "ok" for r in report.rows)
        print(f"✅ {len(report.rows)} sweep row(s), {failed} failed, written to {config.outputs.dir}")
        for fit in report.fits:
            if fit.status == "ok":
                print(f"   alpha={fit.alpha} gamma={fit.gamma} K={fit.K}: E = {fit.C:.4g} N^-{fit.p:.4f}")
            else:
                print(f"   alpha={fit.alpha} gamma={fit.gamma} K={fit.K}: fit {fit.status} ({fit.n_points} point(s))")
        return EXIT_OK

    if args.command == "map":
        config = _map_config(config)
    field = getattr(args, "field", None)
    manifest = run_single(config, field_path=field)
    print(f"✅ {args.command}: {len(manifest.files)} file(s) written to {config.outputs.dir}")
    if args.command == "rate" and "rate" in manifest.summary:
        rate = manifest.summary["rate"]
        print(f"   U* = {rate['barrier']:.6g}, T = {rate['expected_time']:.6g}, rate = {rate['rate']:.6g}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_dir, logging.DEBUG if args.verbose else logging.INFO)
    try:
        return run(args)
    except ConfigError as e:
        print(f"❌ [config] {e}", file=sys.stderr)
        return EXIT_USAGE
    except QpotError as e:
        logger.error(f"Run failed during {e.stage}: {e}")
        print(f"❌ [{e.stage}] {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"❌ [io] {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
