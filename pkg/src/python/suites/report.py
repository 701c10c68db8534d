"""
Report Suite

Merges result records of one suite into comparison tables. Certified and
heuristic estimates go to separate columns; sweep tables are joined on
their sweep variables.
"""

import json
from functools import reduce
from pathlib import Path
from typing import Any, Dict, List, Tuple

import pandas as pd
from pydantic import ValidationError

from cqms_config import ExperimentConfig, ReportSection, resolve_path
from cqms_suite_base import SuiteBase, SuiteOutput
from cqms_types import CheckReport, InputError, ResultRecord

# Columns a sweep table may be keyed on, in join order
SWEEP_KEYS = ("q", "p", "n", "j", "eps", "case", "label")


def load_record(path: Path) -> ResultRecord:
    """
    Raises:
        InputError: if the file is not a result record
    """
    try:
        return ResultRecord.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise InputError(f"{path} is not a result record: {exc}") from exc


def source_labels(paths: List[Path]) -> List[str]:
    """Run directory names, made unique by position where they clash."""
    names = [p.parent.name or p.stem for p in paths]
    if len(set(names)) == len(names):
        return names
    return [f"{i}:{name}" for i, name in enumerate(names)]


def estimate_frame(records: List[Tuple[str, ResultRecord]]) -> pd.DataFrame:
    rows = []
    for source, record in records:
        for name, est in record.estimates.items():
            rows.append({
                "source": source,
                "estimate": name,
                "n": est.n,
                "kind": str(est.kind),
                "certified": est.value if est.certified else None,
                "heuristic": None if est.certified else est.value,
                "lower": est.lower,
                "upper": est.upper,
            })
    return pd.DataFrame(rows, columns=["source", "estimate", "n", "kind", "certified", "heuristic", "lower", "upper"])


def merge_table(frames: List[Tuple[str, pd.DataFrame]]) -> pd.DataFrame:
    """
    Outer join of one table across sources on the sweep keys they share;
    other columns get the source as suffix. Without shared keys the rows are
    stacked with a source column.
    """
    if len(frames) == 1:
        return frames[0][1]
    keys = [k for k in SWEEP_KEYS if all(k in frame.columns for _, frame in frames)]
    if not keys or any(frame.duplicated(subset=keys).any() for _, frame in frames):
        return pd.concat([frame.assign(source=source) for source, frame in frames], ignore_index=True)
    renamed = [frame.rename(columns={c: f"{c}@{source}" for c in frame.columns if c not in keys})
               for source, frame in frames]
    return reduce(lambda left, right: left.merge(right, on=keys, how="outer"), renamed).sort_values(keys)


def to_rows(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    """JSON-ready rows; missing values become None."""
    return json.loads(frame.to_json(orient="records", double_precision=15))


class ReportSuite(SuiteBase):
    """
    Report suite. Failing checks of the inputs are reported, not enforced.
    """

    strict = False

    def get_suite_info(self) -> Dict[str, str]:
        return {
            "name": "report",
            "version": "1.0.0",
            "description": "Comparison tables from result records of one suite",
            "author": "cqms",
        }

    def execute(self, config: ExperimentConfig, section: ReportSection, output: SuiteOutput) -> None:
        paths = [resolve_path(config.base_dir, p) for p in section.inputs]
        loaded = [load_record(p) for p in paths]
        suites = sorted({r.suite for r in loaded})
        if len(suites) > 1:
            raise InputError(f"cannot merge records of different suites: {', '.join(suites)}")
        records = list(zip(source_labels(paths), loaded))
        self.logger.info(f"merging {len(records)} {suites[0]} records")

        output.table("estimates", to_rows(estimate_frame(records)))
        output.table("checks", [{"source": source, "check": c.name, "passed": c.passed,
                                 "inconclusive": c.inconclusive, "message": c.message}
                                for source, record in records for c in record.checks])
        names = sorted({name for _, record in records for name in record.tables})
        for name in names:
            frames = [(source, pd.DataFrame(record.tables[name])) for source, record in records
                      if record.tables.get(name)]
            if frames:
                output.table(name, to_rows(merge_table(frames)))

        hashes = {record.config_hash for _, record in records}
        output.check(CheckReport.pass_report("inputs", details={"suite": suites[0], "records": len(records),
                                                                "configs": len(hashes)}))
        for source, record in records:
            failed = [c.name for c in record.checks if not c.passed]
            name = f"record[{source}]"
            output.check(CheckReport.pass_report(name, details={"checks": len(record.checks)}) if not failed
                         else CheckReport.fail_report(name, f"failed checks: {', '.join(failed)}"))


suite_instance = ReportSuite
