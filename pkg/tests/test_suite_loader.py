import sys
from pathlib import Path

import pytest

from cqms_config import parse_config
from cqms_suite_base import SuiteOutput, plain, run_sweep
from cqms_types import CheckReport, EstimateKind, InputError, MetricEstimate
from suite_loader import SuiteLoader

SUITE_NAMES = ["berezin", "distance", "nctorus", "report", "validate"]


def test_builtin_suites_are_discovered():
    files = SuiteLoader().discover_suites()
    assert sorted(Path(f).stem for f in files) == SUITE_NAMES


@pytest.mark.parametrize("name", SUITE_NAMES)
def test_builtin_suites_load(name):
    suite = SuiteLoader().load_builtin(name)
    assert suite is not None
    assert suite.name == name
    assert suite.version == "1.0.0"
    suite.shutdown()


def test_broken_suite_files_are_skipped(tmp_path):
    broken = tmp_path / "broken.py"
    broken.write_text("raise RuntimeError('boom')\n", encoding="utf-8")
    empty = tmp_path / "empty.py"
    empty.write_text("VALUE = 1\n", encoding="utf-8")
    loader = SuiteLoader(tmp_path)
    assert loader.load_suite(broken) is None
    assert "cqms_suite_broken" not in loader.loaded_modules
    assert "cqms_suite_broken" not in sys.modules
    assert loader.load_suite(empty) is None
    assert loader.load_suite(tmp_path / "absent.py") is None


def test_suite_refuses_other_configurations():
    suite = SuiteLoader().load_builtin("berezin")
    with pytest.raises(InputError):
        suite.run(parse_config({"suite": "nctorus", "seed": 1}))


def test_sweeps_keep_cell_order_across_threads():
    cells = list(range(12))
    serial = run_sweep(lambda cell, seed: (cell, seed), cells, seed=5, workers=1)
    threaded = run_sweep(lambda cell, seed: (cell, seed), cells, seed=5, workers=4)
    assert serial == threaded
    assert [cell for cell, _ in serial] == cells


def test_output_rejects_duplicate_estimates():
    output = SuiteOutput()
    output.estimate("x", MetricEstimate(value=1.0, kind=EstimateKind.EXACT))
    with pytest.raises(KeyError):
        output.estimate("x", MetricEstimate(value=2.0, kind=EstimateKind.EXACT))


def test_numpy_values_become_plain_python():
    import numpy as np

    output = SuiteOutput()
    output.check(CheckReport.pass_report("c", details={"v": np.float64(0.5), "a": np.arange(2)}))
    assert output.checks[0].details == {"v": 0.5, "a": [0, 1]}
    assert plain({"k": np.int64(3)}) == {"k": 3}
