import json

import pytest

from cqms_config import (
    DistanceSection,
    ExperimentConfig,
    NctorusSection,
    ValidateSection,
    config_schema,
    load_config,
    parse_config,
)
from cqms_types import ConfigError, InputError

SCALING_CASE = {"name": "scaling", "x": {"kind": "two_point"},
                "bridge": {"kind": "scaling", "lambdas": [2.0], "constant": 1.0}}


def test_minimal_document_fills_in_defaults():
    config = parse_config({"suite": "nctorus", "seed": 3})
    assert config.workers == 1
    section = config.section()
    assert isinstance(section, NctorusSection)
    assert section.rcp.space.q == 5


def test_validate_section_uses_its_alias():
    config = parse_config({"suite": "validate", "seed": 0, "validate": {"samples": 4}})
    assert isinstance(config.section(), ValidateSection)
    assert config.section().samples == 4


def test_missing_seed_is_a_configuration_error():
    with pytest.raises(ConfigError):
        parse_config({"suite": "distance"})
    assert parse_config({"suite": "distance"}, seed_override=9).seed == 9


def test_schema_violations_are_reported():
    with pytest.raises(ConfigError, match="schema violation"):
        parse_config({"suite": "distance", "seed": 1, "distance": {"samples": 0}})
    with pytest.raises(ConfigError):
        parse_config({"suite": "distance", "seed": 1, "unknown": True})
    with pytest.raises(ConfigError):
        parse_config({"suite": "nosuch", "seed": 1})


def test_case_shapes_are_checked():
    bad = {"name": "norm", "x": {"kind": "two_point"}, "bridge": {"kind": "norm", "epsilon": 0.1}}
    with pytest.raises(ConfigError):
        parse_config({"suite": "distance", "seed": 1, "distance": {"cases": [bad]}})


def test_suite_must_match_the_command():
    assert parse_config({"seed": 1}, suite="berezin").suite == "berezin"
    with pytest.raises(ConfigError):
        parse_config({"suite": "distance", "seed": 1}, suite="berezin")


def test_configuration_errors_are_input_errors():
    assert issubclass(ConfigError, InputError)


def test_hash_ignores_output_location_and_threads():
    base = parse_config({"suite": "nctorus", "seed": 3})
    moved = parse_config({"suite": "nctorus", "seed": 3, "workers": 4, "output_dir": "elsewhere"})
    reseeded = parse_config({"suite": "nctorus", "seed": 4})
    assert base.config_hash == moved.config_hash
    assert base.config_hash != reseeded.config_hash


def test_cases_build_one_setup_per_parameter():
    config = parse_config({"suite": "distance", "seed": 1,
                           "distance": {"cases": [{**SCALING_CASE, "bridge": {**SCALING_CASE["bridge"],
                                                                             "lambdas": [1.0, 2.0, 4.0]}}]}})
    section = config.section()
    assert isinstance(section, DistanceSection)
    setups = section.cases[0].build(config.base_dir)
    assert [s.label for s in setups] == ["scaling[lambda=1.0]", "scaling[lambda=2.0]", "scaling[lambda=4.0]"]
    assert [s.bridge.analytic_bound() for s in setups] == pytest.approx([1.0, 0.5, 0.25])


def test_quotient_case_uses_the_lattice_defect():
    case = {"name": "q", "x": {"kind": "torus", "q": 5, "p": 1}, "bridge": {"kind": "quotient", "eta": 0.01}}
    config = parse_config({"suite": "distance", "seed": 1, "distance": {"cases": [case]}})
    (setup,) = config.section().cases[0].build(config.base_dir)
    assert setup.bridge.epsilon == pytest.approx(setup.lx.fejer_defect(1))
    assert setup.bridge.analytic_bound() == pytest.approx(setup.bridge.epsilon + 0.01)


def test_explicit_space_from_a_file(tmp_path, write_config):
    system = {"ambient_dim": 2, "basis": [
        {"rows": 2, "cols": 2, "re": [1, 0, 0, 1], "im": [0, 0, 0, 0]},
        {"rows": 2, "cols": 2, "re": [1, 0, 0, -1], "im": [0, 0, 0, 0]},
    ]}
    (tmp_path / "pair.json").write_text(json.dumps(system), encoding="utf-8")
    zero = {"rows": 1, "cols": 1, "re": [0], "im": [0]}
    two = {"rows": 1, "cols": 1, "re": [2], "im": [0]}
    space = {"kind": "explicit", "file": "pair.json", "lip_maps": [[zero, two]]}
    path = write_config({"suite": "validate", "seed": 0, "validate": {"spaces": [space]}})
    config = load_config(path)
    lip = config.section().spaces[0].build(config.base_dir)
    assert lip.system.dim == 2

    missing = write_config({"suite": "validate", "seed": 0,
                            "validate": {"spaces": [{**space, "file": "absent.json"}]}}, "missing.json")
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(missing)


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_schema_describes_the_document():
    schema = config_schema()
    assert "seed" in schema["properties"]
    assert "validate" in schema["properties"]
    assert set(ExperimentConfig.model_fields) >= {"suite", "seed", "workers"}
