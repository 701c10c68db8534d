"""
cqms - Command Line

    cqms <suite> --config FILE [--seed N] [--out DIR] [--workers N] [--log-level LEVEL]
    cqms schema [--out FILE]

A run writes result.json, runtime.json, summary.txt, one CSV per table and
cqms.log into the output directory. Exit codes: 0 success, 1 bad
configuration or input, 2 failed validation, 3 numerical failure.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from cqms_config import SUITES, ExperimentConfig, config_schema, load_config
from cqms_logger import get_logger, setup_logging
from cqms_types import InputError, NumericalFailure, ResultRecord, ValidationFailure
from suite_loader import SuiteLoader

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

logger = get_logger("cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqms", description="Compact quantum metric space experiments")
    commands = parser.add_subparsers(dest="command", required=True)
    for suite in SUITES:
        sub = commands.add_parser(suite, help=f"run the {suite} suite")
        sub.add_argument("--config", required=True, type=Path, help="JSON experiment document")
        sub.add_argument("--seed", type=int, default=None, help="override the document's seed")
        sub.add_argument("--out", type=Path, default=None, help="output directory (default: the document's)")
        sub.add_argument("--workers", type=int, default=None, help="threads for sweeps")
        sub.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    schema = commands.add_parser("schema", help="print the JSON schema of experiment documents")
    schema.add_argument("--out", type=Path, default=None, help="write the schema to a file")
    return parser


def render_summary(record: ResultRecord) -> str:
    """Plain-text digest of a result record."""
    lines = [f"suite: {record.suite}", f"seed: {record.seed}", f"config: {record.config_hash}",
             f"status: {'passed' if record.passed else 'FAILED'}", ""]
    if record.estimates:
        lines.append("estimates:")
        width = max(len(name) for name in record.estimates)
        for name, est in record.estimates.items():
            bracket = "" if est.bracket is None else f"  [{est.bracket[0]:.6g}, {est.bracket[1]:.6g}]"
            lines.append(f"  {name:<{width}}  {est.value:.6g}  ({est.kind}, n={est.n}){bracket}")
        lines.append("")
    if record.checks:
        lines.append("checks:")
        for check in record.checks:
            status = "ok" if check.passed else ("inconclusive" if check.inconclusive else "FAIL")
            lines.append(f"  [{status}] {check.name}" + (f": {check.message}" if check.message else ""))
        lines.append("")
    for name, rows in record.tables.items():
        lines.append(f"table {name}: {len(rows)} rows")
    return "\n".join(lines) + "\n"


def write_outputs(out_dir: Path, record: ResultRecord) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "result.json").write_text(record.model_dump_json(indent=2), encoding="utf-8")
    (out_dir / "runtime.json").write_text(json.dumps({"runtime_seconds": record.runtime_seconds}, indent=2),
                                          encoding="utf-8")
    (out_dir / "summary.txt").write_text(render_summary(record), encoding="utf-8")
    for name, rows in record.tables.items():
        pd.DataFrame(rows).to_csv(out_dir / f"{name}.csv", index=False)
    logger.info(f"results written to {out_dir}")


def run_suite(args: argparse.Namespace) -> int:
    config: ExperimentConfig = load_config(args.config, seed_override=args.seed, suite=args.command)
    if args.workers is not None:
        if args.workers < 1:
            raise InputError("--workers must be at least 1")
        config = config.model_copy(update={"workers": args.workers})
    out_dir = args.out if args.out is not None else config.base_dir / config.output_dir
    setup_logging(args.log_level, out_dir / "cqms.log")

    suite = SuiteLoader().load_builtin(config.suite)
    if suite is None:
        raise InputError(f"suite {config.suite} could not be loaded")
    try:
        record = suite.run(config)
        write_outputs(out_dir, record)
        suite.enforce(record)
    finally:
        suite.shutdown()
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(getattr(args, "log_level", "INFO"))
    if args.command == "schema":
        text = json.dumps(config_schema(), indent=2, sort_keys=True)
        if args.out is not None:
            args.out.write_text(text + "\n", encoding="utf-8")
        else:
            print(text)
        return EXIT_OK
    try:
        return run_suite(args)
    except InputError as e:
        logger.error(str(e))
        return EXIT_INPUT
    except ValidationFailure as e:
        logger.error(str(e))
        return EXIT_VALIDATION
    except NumericalFailure as e:
        logger.error(f"numerical failure: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
