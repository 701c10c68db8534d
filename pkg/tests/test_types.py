import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from cqms_types import CheckReport, CMatrix, EstimateKind, MetricEstimate, ResultRecord, SeminormValue


def test_cmatrix_keeps_row_major_layout():
    a = np.array([[1 + 2j, 3], [4, 5 - 1j]])
    doc = CMatrix.from_array(a)
    assert doc.re == [1.0, 3.0, 4.0, 5.0]
    assert doc.im == [2.0, 0.0, 0.0, -1.0]
    assert_allclose(doc.to_array(), a)


def test_cmatrix_rejects_wrong_counts_and_non_finite_entries():
    with pytest.raises(ValidationError):
        CMatrix(rows=2, cols=2, re=[1.0, 0.0, 0.0], im=[0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        CMatrix(rows=1, cols=1, re=[float("inf")], im=[0.0])


def test_seminorm_brackets():
    exact = SeminormValue.exact(2.0)
    assert exact.width == 0.0
    bracket = SeminormValue.bracketed(1.0, 3.0)
    assert (bracket.lower, bracket.upper, bracket.kind) == (1.0, 3.0, "bracketed")
    with pytest.raises(ValidationError):
        SeminormValue(value=5.0, lower=1.0, upper=2.0)


def test_estimate_bounds_follow_kind():
    upper = MetricEstimate(value=0.3, kind=EstimateKind.UPPER)
    assert upper.upper == 0.3 and upper.lower is None and upper.certified
    lower = MetricEstimate(value=0.1, kind=EstimateKind.LOWER)
    assert lower.lower == 0.1 and lower.upper is None
    guess = MetricEstimate(value=0.2, kind=EstimateKind.HEURISTIC, bracket=(0.1, 0.2))
    assert not guess.certified
    assert (guess.lower, guess.upper) == (0.1, 0.2)


def test_combined_reports():
    ok = CheckReport.pass_report("a")
    unsure = CheckReport.inconclusive_report("b", "solver gave up")
    bad = CheckReport.fail_report("c", "broken")
    assert CheckReport.combine("all", [ok, ok]).passed
    mixed = CheckReport.combine("all", [ok, unsure])
    assert not mixed.passed and mixed.inconclusive
    failed = CheckReport.combine("all", [ok, unsure, bad])
    assert not failed.passed and not failed.inconclusive


def test_result_record_hides_runtime():
    record = ResultRecord(suite="validate", config_hash="x", seed=1, checks=[CheckReport.pass_report("a")],
                          runtime_seconds=12.5)
    data = record.model_dump(mode="json")
    assert "runtime_seconds" not in data
    assert data["passed"] is True
