# csgrav/main.py - command-line entry point
import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from csgrav.config import configure_logging
from csgrav.errors import InadmissibleSectionError
from csgrav.schemas import COMMAND_DIMENSIONS, ChartSpec, ErrorResponse, Report, RunSpec, SolverSpec
from csgrav.services.reporting import dumps, environment, write_history_csv, write_text
from csgrav.services.suites import SUITES

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_INTERNAL = 3

# Quadrature workers when --threads is not given
DEFAULT_THREADS = min(os.cpu_count() or 1, 8)


class SpecError(ValueError):
    """Run spec that cannot be read or does not match the command."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csgrav",
        description="Chern-Simons / Palatini identity checks, correspondence runs and lattice extremization",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("verify", "run the full identity suite"),
        ("correspond", "compare Chern-Simons and Palatini actions over random sections"),
        ("chern", "Chern-Weil checks on a 4-torus"),
        ("extremize", "descend to a lattice extremal and test stationarity"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--spec", help="JSON run spec; defaults to the built-in spec for the command")
        sub.add_argument("--out", help="write the JSON report here instead of stdout")
        sub.add_argument("--seed", type=int, help="override the spec's seed")
        sub.add_argument(
            "--threads", type=int, default=DEFAULT_THREADS, help="worker threads for quadrature"
        )
        sub.add_argument("--timing", action="store_true", help="include wall time in the report")
        sub.add_argument("--quiet", action="store_true", help="log warnings only")
        if name == "extremize":
            sub.add_argument("--csv", help="write the iteration history as CSV")

    schema = commands.add_parser("schema", help="print or write the JSON schemas")
    schema.add_argument("--out", help="directory for run_spec.schema.json and report.schema.json")
    schema.add_argument("--quiet", action="store_true", help="log warnings only")
    return parser


def default_spec(command: str) -> RunSpec:
    return RunSpec(
        command=command,
        chart=ChartSpec(dim=COMMAND_DIMENSIONS[command]),
        solver=SolverSpec() if command == "extremize" else None,
    )


def load_spec(command: str, path: Optional[str], seed: Optional[int]) -> RunSpec:
    """
    Read and validate a run spec.

    Raises:
        SpecError: unreadable file, invalid JSON or a spec for another command.
        ValidationError: schema violations.
    """
    if path is None:
        data = default_spec(command).model_dump()
    else:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise SpecError(f"cannot read spec {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise SpecError("a run spec must be a JSON object")
        data.setdefault("command", command)
        if data["command"] != command:
            raise SpecError(f"spec is for '{data['command']}', not '{command}'")
    if seed is not None:
        data["seed"] = seed
    return RunSpec.model_validate(data)


def _error(kind: str, detail: str) -> str:
    return dumps(ErrorResponse(error=kind, detail=detail).model_dump())


def _write_schemas(out: Optional[str]) -> int:
    schemas = {
        "run_spec": RunSpec.model_json_schema(),
        "report": Report.model_json_schema(),
    }
    if out is None:
        print(json.dumps(schemas, indent=2, sort_keys=True))
        return EXIT_PASS
    target = Path(out)
    target.mkdir(parents=True, exist_ok=True)
    for name, schema in schemas.items():
        path = target / f"{name}.schema.json"
        path.write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n")
        logger.info("Wrote %s", path)
    return EXIT_PASS


def run(args: argparse.Namespace) -> int:
    if args.threads < 1:
        print(_error("invalid_input", f"--threads must be >= 1, got {args.threads}"))
        return EXIT_INVALID
    try:
        spec = load_spec(args.command, args.spec, args.seed)
    except ValidationError as exc:
        print(_error("invalid_spec", str(exc)))
        return EXIT_INVALID
    except SpecError as exc:
        print(_error("invalid_spec", str(exc)))
        return EXIT_INVALID

    logger.info("Running '%s' with seed %d on %d thread(s)", spec.command, spec.seed, args.threads)
    started = time.perf_counter()
    try:
        outcome = SUITES[spec.command](spec, args.threads)
    except InadmissibleSectionError as exc:
        logger.error("Generated section was rejected: %s", exc)
        print(_error("internal_error", f"generated section was inadmissible: {exc}"))
        return EXIT_INTERNAL
    except Exception as exc:
        logger.exception("Suite '%s' failed", spec.command)
        print(_error("internal_error", f"{type(exc).__name__}: {exc}"))
        return EXIT_INTERNAL
    wall_time = time.perf_counter() - started

    report = Report(
        ok=outcome.passed,
        command=spec.command,
        spec=spec,
        checks=outcome.checks,
        results=outcome.results,
        environment=environment(),
        wall_time=wall_time if args.timing else None,
    )
    payload = report.model_dump()
    if payload["wall_time"] is None:
        del payload["wall_time"]
    write_text(dumps(payload), args.out)
    if getattr(args, "csv", None) and outcome.history:
        write_history_csv(outcome.history, args.csv)

    failed = [record.name for record in outcome.checks if record.status == "FAIL"]
    logger.info(
        "'%s' finished in %.2f s: %d checks, %d failed",
        spec.command, wall_time, len(outcome.checks), len(failed),
    )
    return EXIT_PASS if not failed else EXIT_FAIL


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.quiet)
    if args.command == "schema":
        return _write_schemas(args.out)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
