"""Command-line entry point for overlay, multicast, stability and verification runs."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Sequence

import structlog
from dotenv import load_dotenv

from geocast.config import (
    DistanceKind, ExperimentId, HyperplaneFamily, InsertionMode, KnowledgeMode, PreferredRule, Preset,
    RunConfig, StrategyKind, UpdateOrder, ValidationError,
)
from geocast.error_handling import SimulationError, UsageError, VerificationError
from geocast.experiments import plan_command, plan_experiment, report_path, write_csv, write_report
from orchestrator import ExperimentOrchestrator

logger = structlog.get_logger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
# namespace entries that are not RunConfig fields
_CLI_ONLY = {"command", "config", "out", "log_level", "json_logs"}


def configure_logging(level: str = "INFO", json_logs: bool = False) -> None:
    """Route structlog through stdlib logging on stderr."""
    logging.basicConfig(level=getattr(logging, level.upper()), format="%(message)s", stream=sys.stderr, force=True)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer() if json_logs else structlog.dev.ConsoleRenderer(colors=False),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def _values(enum_cls: Any) -> list:
    return [member.value for member in enum_cls]


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    run = parser.add_argument_group("run parameters")
    run.add_argument("--config", type=Path, help="Flat JSON file of run parameters (flags override it)")
    run.add_argument("--out", type=Path, help="CSV output path (default results/<name>.csv); the report goes next to it")
    run.add_argument("--seed", type=int, help="Master seed (default 0)")
    run.add_argument("--n", type=int, help="Number of peers (default 1000)")
    run.add_argument("--d", type=int, help="Number of dimensions (default 2)")
    run.add_argument("--vmax", type=float, help="Coordinate upper bound (default 1000)")
    run.add_argument("--br", type=int, help="Announcement radius in hops, >= 2 (default 2)")
    run.add_argument("--freshness-rounds", type=int, help="Rounds a heard announcement stays fresh (default 2)")
    run.add_argument("--k", type=int, help="Neighbours per region (default 1)")
    run.add_argument("--strategy", choices=_values(StrategyKind), help="Neighbour selection method")
    run.add_argument("--knowledge", dest="knowledge_mode", choices=_values(KnowledgeMode), help="Knowledge mode")
    run.add_argument("--insertion", choices=_values(InsertionMode), help="Peer insertion mode")
    run.add_argument("--distance", choices=_values(DistanceKind), help="Distance used to rank candidates")
    run.add_argument("--time-coord-index", type=int, help="1-based coordinate replaced by the lifetime")
    run.add_argument("--max-rounds", type=int, help="Convergence round limit (default 10*N)")
    run.add_argument("--update-order", choices=_values(UpdateOrder), help="Round update order")
    run.add_argument("--hyperplanes", choices=_values(HyperplaneFamily), help="Plane family for gen-hp")
    run.add_argument("--preferred-rule", choices=_values(PreferredRule), help="Preferred tree neighbour rule")
    run.add_argument("--seeds", type=int, help="Seeds per configuration (default 10)")
    run.add_argument("--preset", choices=_values(Preset), help="Sweep scale")
    run.add_argument("--sweep-n", type=int, nargs="+", help="Override the swept peer counts")
    run.add_argument("--sweep-d", type=int, nargs="+", help="Override the swept dimensions")
    run.add_argument("--sweep-k", type=int, nargs="+", help="Override the swept K values")
    run.add_argument("--root-sample", type=int, help="Build trees from this many sampled roots instead of all")
    run.add_argument("--jobs", type=int, help="Worker pool size (default: CPU count)")
    run.add_argument("--include-timings", action="store_true", help="Write wall time into the report")
    run.add_argument("--allow-large", action="store_true", help="Lift the oracle peer cap")

    logs = parser.add_argument_group("logging")
    logs.add_argument("--log-level", choices=LOG_LEVELS, help="Logging level (default INFO)")
    logs.add_argument("--json-logs", action="store_true", help="Emit logs as JSON lines")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="run_simulation",
        description="Geometric overlay, multicast tree and stability tree simulator",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")
    commands.add_parser("overlay", parents=[common], help="Build one overlay and report degree metrics")
    multicast = commands.add_parser("multicast", parents=[common], help="Build one overlay and one multicast tree")
    multicast.add_argument("--root", type=int, default=argparse.SUPPRESS, help="Root peer id (default 0)")
    commands.add_parser("stability", parents=[common], help="Build one lifetime overlay and its stability tree")
    experiment = commands.add_parser("experiment", parents=[common], help="Run an experiment sweep")
    experiment.add_argument("--id", dest="experiment", choices=_values(ExperimentId),
                            default=argparse.SUPPRESS, help="Experiment to run")
    commands.add_parser("verify", parents=[common], help="Run every oracle check on small instances")
    return parser


def _fail(error: SimulationError) -> int:
    sys.stderr.write(error.to_json_line() + "\n")
    sys.stderr.write(f"error: {error}\n")
    return error.exit_code


def run(args: argparse.Namespace) -> int:
    overrides: Dict[str, Any] = {k: v for k, v in vars(args).items() if k not in _CLI_ONLY}
    config = RunConfig.from_sources(getattr(args, "config", None), overrides)

    plan = plan_experiment(config) if args.command == "experiment" else plan_command(args.command, config)
    out = getattr(args, "out", None) or Path("results") / f"{plan.experiment}.csv"

    result = ExperimentOrchestrator(config.jobs).run(plan)
    csv_path = write_csv(result.rows, out)
    report = write_report(result, report_path(csv_path))
    print(f"{plan.experiment}: {len(result.rows)} rows -> {csv_path} (report {report})")

    first = result.errors.first()
    if first is not None:
        raise first
    failed = result.failed_checks()
    if failed:
        raise VerificationError(
            f"{len(failed)} embedded check(s) failed",
            {"failed": failed[:20], "failed_count": len(failed)},
        )
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return exc.code if isinstance(exc.code, int) else 2

    configure_logging(getattr(args, "log_level", "INFO"), getattr(args, "json_logs", False))
    load_dotenv()

    try:
        return run(args)
    except ValidationError as exc:
        problems = [{"field": ".".join(str(p) for p in e["loc"]), "message": e["msg"]} for e in exc.errors()]
        return _fail(UsageError(f"Invalid parameters: {exc.error_count()} error(s)", {"errors": problems}))
    except SimulationError as exc:
        logger.error("run failed", command=args.command, category=exc.category.value)
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
