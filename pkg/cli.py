# cli.py
"""
Batch driver.

  python cli.py run    --config params.cfg --seed 1
  python cli.py sweep  --config params.cfg --param recovery_time --values 10,20,30 \
                       --param working_pool_size --values 4128-4192:32 \
                       --replications 20 --seed 7 --out recovery_by_pool.csv
  python cli.py params --config params.cfg      # effective configuration

Exit status: 0 ok, 2 configuration / usage error, 1 simulation or I/O failure.
"""

import argparse
import logging
import sys
from dataclasses import fields
from typing import Optional, Sequence

from backend_errors import ConfigError, SimulatorError
from backend_experiments import sweep_spec_from_document
from backend_job_orchestration import RunResult, run_simulation
from backend_main_processing import process_sweep
from backend_param_config import ConfigDocument, SimParams, load_config, serialize_params

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cli.py", description="Cluster reliability simulator for one training job.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="params file (key = expression lines, optional [sweep] section)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--log-file", help="append log records to this file instead of stderr")

    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="simulate one configuration once")
    run.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    run.add_argument("--replication", type=int, default=0)

    sweep = sub.add_parser("sweep", parents=[common], help="one-way or two-way parameter sweep")
    sweep.add_argument("--name", help="display name of the experiment")
    sweep.add_argument("--param", action="append", default=[], metavar="KEY",
                       help="parameter to sweep; give twice for a two-way sweep")
    sweep.add_argument("--values", action="append", default=[], metavar="V1,V2,...",
                       help="values for the matching --param; omit to use the preset list")
    sweep.add_argument("--replications", type=int, help="default: replications from the config")
    sweep.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    sweep.add_argument("--workers", type=int, default=1, help="processes running replications in parallel")
    sweep.add_argument("--out", help="summary CSV path; the raw sidecar goes next to it")
    sweep.add_argument("--xlsx", help="also write an Excel workbook")

    sub.add_parser("params", parents=[common], help="print the effective parameters")
    return ap


def setup_logging(level: str, log_file: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s: %(message)s",
        filename=log_file,
        force=True,
    )


def _load(path: Optional[str]) -> ConfigDocument:
    if path is None:
        return ConfigDocument(params=SimParams().validate(), sweep={})
    try:
        return load_config(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc


def format_run_result(result: RunResult) -> str:
    return "\n".join(f"{f.name} = {getattr(result, f.name)}" for f in fields(result))


def _sweep_overrides(args: argparse.Namespace) -> dict:
    if len(args.param) > 2:
        raise ConfigError("at most two --param flags (one-way or two-way sweep)")
    if args.values and len(args.values) != len(args.param):
        raise ConfigError("give one --values per --param, or none to use the presets")

    overrides = {
        "display_name": args.name,
        "replications": args.replications,
        "base_seed": args.seed,
    }
    if args.param:
        overrides["parameter"] = args.param[0]
        overrides["values"] = args.values[0] if args.values else None
        overrides["second_parameter"] = args.param[1] if len(args.param) == 2 else None
        overrides["second_values"] = args.values[1] if len(args.values) == 2 else None
    return overrides


def cmd_run(args: argparse.Namespace, doc: ConfigDocument) -> int:
    result = run_simulation(doc.params, args.seed, args.replication)
    print(format_run_result(result))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, doc: ConfigDocument) -> int:
    overrides = _sweep_overrides(args)
    sweep = dict(doc.sweep)
    # a --param on the command line replaces the file's sweep entirely
    if args.param:
        for key in ("parameter", "values", "second_parameter", "second_values"):
            sweep.pop(key, None)
    spec = sweep_spec_from_document(sweep, doc.params, **overrides)
    out = args.out or f"{spec.display_name}.csv"
    _, summary_df, _ = process_sweep(doc.params, spec, workers=max(1, args.workers), out_path=out, xlsx_path=args.xlsx)
    print(f"{spec.display_name}: {len(summary_df)} cells x {spec.replications} replications -> {out}")
    return EXIT_OK


def cmd_params(args: argparse.Namespace, doc: ConfigDocument) -> int:
    sys.stdout.write(serialize_params(doc.params))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "params": cmd_params}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    setup_logging(args.log_level, args.log_file)

    try:
        doc = _load(args.config)
        return COMMANDS[args.command](args, doc)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulatorError as exc:
        logger.exception("simulation failed")
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(run_cli())
