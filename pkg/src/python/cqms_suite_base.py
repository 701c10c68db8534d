"""
cqms - Base Suite Classes

Base classes for the experiment suites run by the command line. A suite turns
an ExperimentConfig into a ResultRecord: named estimates, check reports and
tables, all reproducible from the configuration and its seed.
"""

import json
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, TypeVar

from pydantic import BaseModel

from cqms_config import ExperimentConfig
from cqms_logger import get_logger
from cqms_metrics import derive_seeds
from cqms_types import CheckReport, InputError, MetricEstimate, ResultRecord, ValidationFailure

T = TypeVar("T")
R = TypeVar("R")


def _builtin(obj: Any) -> Any:
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    return str(obj)


def plain(data: Any) -> Any:
    """data with numpy scalars and arrays replaced by Python values."""
    return json.loads(json.dumps(data, default=_builtin))


def run_sweep(fn: Callable[[T, int], R], cells: Sequence[T], seed: int, workers: int = 1) -> List[R]:
    """
    Evaluate fn(cell, cell_seed) for every cell, on a thread pool when
    workers > 1. Results come back in the order of the cells.
    """
    seeds = derive_seeds(seed, len(cells))
    if workers <= 1 or len(cells) <= 1:
        return [fn(cell, s) for cell, s in zip(cells, seeds)]
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="cqms-sweep") as pool:
        futures = [pool.submit(fn, cell, s) for cell, s in zip(cells, seeds)]
        return [f.result() for f in futures]


@dataclass
class SuiteOutput:
    """What a suite collects while it runs."""
    estimates: Dict[str, MetricEstimate] = field(default_factory=dict)
    checks: List[CheckReport] = field(default_factory=list)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)

    def estimate(self, name: str, estimate: MetricEstimate) -> MetricEstimate:
        if name in self.estimates:
            raise KeyError(f"estimate {name!r} recorded twice")
        estimate = estimate.model_copy(update={"params": plain(estimate.params)})
        self.estimates[name] = estimate
        return estimate

    def check(self, report: CheckReport) -> CheckReport:
        report = report.model_copy(update={"details": plain(report.details)})
        self.checks.append(report)
        return report

    def table(self, name: str, rows: List[Dict[str, Any]]) -> None:
        self.tables[name] = plain(rows)


class SuiteBase(ABC):
    """
    Base class for all experiment suites.

    Subclasses describe themselves through get_suite_info() and do their work
    in execute(); run() wraps it into a ResultRecord.
    """

    # Whether a failing check makes the run fail
    strict: bool = True

    def __init__(self):
        self.suite_name = self.__class__.__name__
        self._initialized = False
        self.logger = get_logger(f"suite.{self.suite_name}")

    @abstractmethod
    def get_suite_info(self) -> Dict[str, str]:
        """
        Get suite information.

        Returns:
            Dictionary containing suite metadata (name, version, description, author)
        """

    @property
    def name(self) -> str:
        return self.get_suite_info()["name"]

    @property
    def version(self) -> str:
        return self.get_suite_info()["version"]

    @property
    def description(self) -> str:
        return self.get_suite_info()["description"]

    def initialize(self) -> bool:
        """
        Initialize the suite. Called when the suite is loaded.

        Returns:
            True if initialization succeeded, False otherwise
        """
        self._initialized = True
        return True

    def shutdown(self) -> None:
        """Shutdown the suite. Called when the suite is unloaded."""
        self._initialized = False

    @abstractmethod
    def execute(self, config: ExperimentConfig, section: BaseModel, output: SuiteOutput) -> None:
        """
        Do the suite's work, recording results into output.

        Args:
            config: The whole experiment configuration
            section: The suite's own settings, defaults filled in
            output: Collector for estimates, checks and tables
        """

    def run(self, config: ExperimentConfig) -> ResultRecord:
        """
        Run the suite on a configuration.

        Returns:
            The result record; failing checks are recorded, not raised
        """
        if config.suite != self.name:
            raise InputError(f"suite {self.name} cannot run a {config.suite} configuration")
        if not self._initialized:
            self.initialize()
        output = SuiteOutput()
        start = time.perf_counter()
        self.logger.info(f"running {self.name} (seed {config.seed}, config {config.config_hash[:12]})")
        self.execute(config, config.section(), output)
        elapsed = time.perf_counter() - start
        record = ResultRecord(suite=self.name, config_hash=config.config_hash, seed=config.seed,
                              estimates=output.estimates, checks=output.checks, tables=output.tables,
                              runtime_seconds=elapsed)
        failed = [c.name for c in record.checks if not c.passed]
        if failed:
            self.logger.error(f"{len(failed)} of {len(record.checks)} checks failed: {', '.join(failed)}")
        else:
            self.logger.info(f"{len(record.checks)} checks passed in {elapsed:.1f}s")
        return record

    def enforce(self, record: ResultRecord) -> None:
        """
        Raise if a strict suite produced a failing check.

        Raises:
            ValidationFailure: carrying the first failing report
        """
        if not self.strict:
            return
        for report in record.checks:
            if not report.passed:
                raise ValidationFailure(f"{self.name}: check {report.name} failed: {report.message}", report)
