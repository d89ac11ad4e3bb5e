"""
Command-line entry point.

    consensus-halt run <experiment> [--csv DIR] [--trace PATH] [--strict] ...
    consensus-halt analyze <experiment>
    consensus-halt reproduce [--csv DIR] [--mode table1|theorem]

Exit codes: 0 success, 1 failed level or failed reproduction check,
2 malformed experiment file or arguments, 3 graph not strongly connected
(``run --strict`` and ``analyze``).
"""

from pathlib import Path
from typing import List, Optional, Sequence
import argparse
import logging
import sys

from src.cli.reproduce import ReproductionSuite, render_outcome
from src.core.config import configure_logging
from src.core.dynamics import DynamicsError, graph_of
from src.core.graph import is_strongly_connected
from src.core.importer import ExperimentFile, ExperimentFileError, load_experiment
from src.core.oracle import ContractViolation, response_time_bound
from src.core.stats import (
    analysis_lines,
    level_slug,
    level_table,
    render_table,
    write_report_json,
    write_trace_csv,
)
from src.core.supervisor import ExperimentResult, Supervisor

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3


def _add_protocol_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=["table1", "theorem"], help="detector eps = level, or level / threshold")
    parser.add_argument("--detector", choices=["yz", "min-rounds"])
    parser.add_argument("--threshold", choices=["diameter", "size"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-halt",
        description="Simulate locally stopped consensus and measure response times.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate every eps level of an experiment file")
    run.add_argument("path", type=Path)
    run.add_argument("--csv", type=Path, metavar="DIR", help="write level table, report and trajectories")
    run.add_argument("--trace", type=Path, metavar="PATH", help="write per-slot trajectory CSV")
    run.add_argument("--strict", action="store_true", help="exit 3 if the graph is not strongly connected")
    run.add_argument("--max-steps", type=int, dest="max_steps")
    _add_protocol_flags(run)

    analyze = sub.add_parser("analyze", help="print D, h, tau(A^h) and the response-time bound")
    analyze.add_argument("path", type=Path)

    reproduce = sub.add_parser("reproduce", help="rerun the bundled examples and check every guarantee")
    reproduce.add_argument("--csv", type=Path, metavar="DIR", help="write trajectory files")
    _add_protocol_flags(reproduce)
    return parser


def _load(args: argparse.Namespace, overrides: Optional[dict] = None) -> ExperimentFile:
    return load_experiment(args.path, overrides=overrides)


def _trace_path(base: Path, level: float, many: bool) -> Path:
    if not many:
        return base
    return base.with_name(f"{base.stem}_eps_{level_slug(level)}{base.suffix or '.csv'}")


def _write_outputs(args: argparse.Namespace, result: ExperimentResult) -> None:
    tasks = [t for t in result.tasks if t.report is not None]
    if args.trace is not None:
        for task in tasks:
            path = write_trace_csv(task.trace, _trace_path(args.trace, task.level, len(tasks) > 1))
            logger.info(f"Wrote {path}")
    if args.csv is not None:
        out: Path = args.csv
        out.mkdir(parents=True, exist_ok=True)
        level_table(result.reports, extended=True).to_csv(out / "levels.csv", index=False)
        write_report_json(out / "report.json", result.reports, result.analysis, name=result.experiment.name)
        for task in tasks:
            write_trace_csv(task.trace, out / f"trajectory_eps_{level_slug(task.level)}.csv")
        logger.info(f"Wrote results to {out}")


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "mode": args.mode,
        "detector": args.detector,
        "threshold": args.threshold,
        "max_steps": args.max_steps,
    }
    experiment = _load(args, overrides)
    connected = is_strongly_connected(graph_of(experiment.weight_matrix()))
    if not connected and args.strict:
        print(f"{args.path}: graph is not strongly connected", file=sys.stderr)
        return EXIT_ASSUMPTION

    record = args.trace is not None or args.csv is not None
    result = Supervisor().run_experiment(experiment, record_trace=record)

    first = result.reports[0] if result.reports else None
    header = f"experiment: {experiment.name or args.path}  n={experiment.n}  mode={experiment.mode}"
    if first is not None:
        header += f"  detector={first.detector}  threshold={first.threshold}={first.threshold_value}"
    print(header)
    if result.analysis is not None:
        print("  ".join(analysis_lines(result.analysis)))
    else:
        print("graph is not strongly connected; stopping guarantees do not apply")
    if result.reports:
        print(render_table(level_table(result.reports)))
    else:
        print("no level completed")

    _write_outputs(args, result)
    for task in result.failed:
        print(f"level {task.level:.6g} failed: {(task.error or '').splitlines()[0]}", file=sys.stderr)
    return EXIT_FAILURE if result.failed else EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    experiment = _load(args)
    weights = experiment.weight_matrix()
    if not is_strongly_connected(graph_of(weights)):
        print(f"{args.path}: graph is not strongly connected", file=sys.stderr)
        return EXIT_ASSUMPTION
    analysis = response_time_bound(weights)
    logger.info(f"Analysis of {experiment.name or args.path}: {analysis.to_dict()}")
    for line in analysis_lines(analysis):
        print(line)
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace) -> int:
    suite = ReproductionSuite(
        mode=args.mode or "table1",
        detector=args.detector,
        threshold=args.threshold,
        csv_dir=args.csv,
    )
    outcome = suite.run()
    print(render_outcome(outcome))
    for check in outcome.failures:
        print(f"reproduce: check failed: {check.name}", file=sys.stderr)
    return EXIT_FAILURE if outcome.failures else EXIT_OK


COMMANDS = {"run": cmd_run, "analyze": cmd_analyze, "reproduce": cmd_reproduce}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    try:
        configure_logging()
    except ValueError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](args)
    except ExperimentFileError as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    except (DynamicsError, ContractViolation) as e:
        print(f"{getattr(args, 'path', 'reproduce')}: {e}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(e, DynamicsError) else EXIT_FAILURE
    except Exception:
        logger.exception(f"Unexpected failure in {args.command}")
        return EXIT_FAILURE


def run_cli(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))


if __name__ == "__main__":
    run_cli()
