import json
from pathlib import Path

import pandas as pd
import pytest

from cqms_cli import EXIT_INPUT, EXIT_OK, EXIT_VALIDATION, main

pytestmark = pytest.mark.integration

EXPERIMENTS = Path(__file__).resolve().parents[1] / "experiments"

SCALING = {"name": "scaling", "x": {"kind": "two_point"},
           "bridge": {"kind": "scaling", "lambdas": [1.0, 4.0], "constant": 1.0}}
DISTANCE = {"suite": "distance", "seed": 11,
            "distance": {"cases": [SCALING], "triangle": None, "hausdorff_level": 0}}


def read_result(directory):
    return json.loads((directory / "result.json").read_text(encoding="utf-8"))


def test_schema_command(tmp_path):
    out = tmp_path / "schema.json"
    assert main(["schema", "--out", str(out)]) == EXIT_OK
    assert "seed" in json.loads(out.read_text(encoding="utf-8"))["properties"]


def test_distance_run_writes_every_output(tmp_path, write_config):
    out = tmp_path / "run"
    assert main(["distance", "--config", str(write_config(DISTANCE)), "--out", str(out)]) == EXIT_OK
    result = read_result(out)
    assert result["passed"] is True
    assert result["estimates"]["scaling[lambda=4.0]"]["value"] == pytest.approx(0.25)
    assert result["estimates"]["scaling[lambda=4.0]"]["kind"] == "upper"
    assert "runtime_seconds" not in result
    assert json.loads((out / "runtime.json").read_text(encoding="utf-8"))["runtime_seconds"] >= 0.0
    assert len(pd.read_csv(out / "distances.csv")) == 2
    assert "scaling_law[scaling]" in (out / "summary.txt").read_text(encoding="utf-8")
    assert (out / "cqms.log").is_file()


def test_runs_are_reproducible(tmp_path, write_config):
    path = write_config(DISTANCE)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["distance", "--config", str(path), "--out", str(first)]) == EXIT_OK
    assert main(["distance", "--config", str(path), "--out", str(second), "--workers", "2"]) == EXIT_OK
    assert (first / "result.json").read_bytes() == (second / "result.json").read_bytes()


def test_seed_override_changes_the_record(tmp_path, write_config):
    out = tmp_path / "run"
    assert main(["distance", "--config", str(write_config(DISTANCE)), "--out", str(out), "--seed", "5"]) == EXIT_OK
    assert read_result(out)["seed"] == 5


def test_bad_configurations_exit_with_input_error(tmp_path, write_config):
    no_seed = write_config({"suite": "distance"}, "no_seed.json")
    assert main(["distance", "--config", str(no_seed), "--out", str(tmp_path / "a")]) == EXIT_INPUT
    assert main(["berezin", "--config", str(write_config(DISTANCE)), "--out", str(tmp_path / "b")]) == EXIT_INPUT
    assert main(["distance", "--config", str(tmp_path / "absent.json")]) == EXIT_INPUT


def test_invalid_bridge_exits_with_validation_failure(tmp_path, write_config):
    tight = {"name": "tight", "x": {"kind": "two_point"}, "y": {"kind": "two_point", "distance": 2.0},
             "bridge": {"kind": "norm", "epsilon": 0.001}}
    document = {**DISTANCE, "distance": {**DISTANCE["distance"], "cases": [SCALING, tight]}}
    out = tmp_path / "run"
    assert main(["distance", "--config", str(write_config(document)), "--out", str(out)]) == EXIT_VALIDATION
    result = read_result(out)
    assert result["passed"] is False
    failed = [c["name"] for c in result["checks"] if not c["passed"]]
    assert failed == ["bridge[tight]"]
    assert "scaling[lambda=1.0]" in result["estimates"]


def test_report_merges_records_of_one_suite(tmp_path, write_config):
    path = write_config(DISTANCE)
    for name in ("a", "b"):
        assert main(["distance", "--config", str(path), "--out", str(tmp_path / name)]) == EXIT_OK
    report = write_config({"suite": "report", "seed": 0,
                           "report": {"inputs": ["a/result.json", "b/result.json"]}}, "report.json")
    out = tmp_path / "merged"
    assert main(["report", "--config", str(report), "--out", str(out)]) == EXIT_OK
    estimates = pd.read_csv(out / "estimates.csv")
    assert len(estimates) == 4
    assert set(estimates["source"]) == {"a", "b"}
    merged = pd.read_csv(out / "distances.csv")
    assert len(merged) == 2
    assert {"value@a", "value@b"} <= set(merged.columns)
    assert (merged["value@a"] == merged["value@b"]).all()


def test_report_refuses_mixed_suites(tmp_path, write_config):
    assert main(["distance", "--config", str(write_config(DISTANCE)), "--out", str(tmp_path / "a")]) == EXIT_OK
    berezin = {"suite": "berezin", "seed": 2, "berezin": {"spins": [1.0], "grid_theta": 8, "grid_phi": 16,
                                                          "rotations": 2, "samples": 2, "property_samples": 2,
                                                          "level_maps": 1}}
    assert main(["berezin", "--config", str(write_config(berezin, "b.json")), "--out", str(tmp_path / "b")]) == EXIT_OK
    report = write_config({"suite": "report", "seed": 0,
                           "report": {"inputs": ["a/result.json", "b/result.json"]}}, "report.json")
    assert main(["report", "--config", str(report), "--out", str(tmp_path / "merged")]) == EXIT_INPUT


@pytest.mark.slow
def test_default_berezin_sweep_covers_sixteen_spins(tmp_path, write_config):
    out = tmp_path / "run"
    assert main(["berezin", "--config", str(write_config({"suite": "berezin", "seed": 7})), "--out", str(out)]) \
        == EXIT_OK
    table = pd.read_csv(out / "berezin.csv")
    assert len(table) == 16
    assert table["jz_residual"].iloc[-1] < table["jz_residual"].iloc[0]


@pytest.mark.slow
def test_sample_validate_document_passes(tmp_path):
    out = tmp_path / "validate"
    assert main(["validate", "--config", str(EXPERIMENTS / "validate.json"), "--out", str(out)]) == EXIT_OK
    checks = {c["name"]: c for c in read_result(out)["checks"]}
    norm_bounds = [c for name, c in checks.items() if name.startswith("norm_bound[")]
    assert len(norm_bounds) == 3
    assert all(c["passed"] for c in norm_bounds)
    assert {c["details"]["diameter_source"] for c in norm_bounds} <= {"certified", "estimate"}
