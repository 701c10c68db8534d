import numpy as np
import pytest

from cqms_lipnorms import (
    Automorphism,
    FunctionalLip,
    ScaledLip,
    check_f_leibniz,
    eval_lip,
    eval_lip_e,
    eval_lip_n,
    leibniz_rule,
    lipnorm_from_spec,
    validate_lipnorm,
)
from cqms_matrix import join_blocks
from cqms_metrics import two_point_lipnorm
from cqms_opsys import OperatorSystem
from cqms_types import InputError


def test_two_point_lipnorm_is_a_lipschitz_constant(unit_pair):
    assert eval_lip(unit_pair, np.diag([3.0, 1.0])).value == pytest.approx(2.0)
    assert eval_lip(unit_pair, 5.0 * np.eye(2)).value == 0.0
    assert eval_lip(two_point_lipnorm(4.0), np.diag([3.0, 1.0])).value == pytest.approx(0.5)


def test_scaling_multiplies_values(unit_pair):
    scaled = ScaledLip(unit_pair, 3.0)
    assert scaled.value(np.diag([1.0, 0.0])) == pytest.approx(3.0)
    with pytest.raises(InputError):
        ScaledLip(unit_pair, 0.0)


def test_functional_maps_must_vanish_on_the_identity(two_point):
    with pytest.raises(InputError):
        FunctionalLip(two_point, [np.array([1.0, 1.0])])
    with pytest.raises(InputError):
        FunctionalLip(two_point, [])


def test_validated_lipnorms(unit_pair, torus3):
    assert validate_lipnorm(unit_pair, samples=16).passed
    report = validate_lipnorm(torus3, samples=16)
    assert report.passed, report.message
    assert report.name == "lipnorm[action]"


def test_degenerate_seminorm_fails_the_kernel_check():
    system = OperatorSystem.full_matrix(2)
    only_diagonal = FunctionalLip.from_functions(system, [lambda b: b[0, 0] - b[1, 1]])
    report = validate_lipnorm(only_diagonal, samples=8)
    assert not report.passed
    assert not report.details["kernel"]["passed"]


def test_extended_seminorm_on_self_adjoint_elements_is_exact(unit_pair):
    value = eval_lip_e(unit_pair, np.diag([2.0, -1.0]))
    assert value.kind == "exact"
    assert value.value == pytest.approx(3.0)


def test_extended_seminorm_brackets_non_self_adjoint_elements(unit_pair):
    value = eval_lip_e(unit_pair, np.diag([1.0 + 2j, 0.0]))
    assert value.lower <= value.upper + 1e-12
    assert value.upper == pytest.approx(3.0)
    assert value.lower >= 2.0 - 1e-9


def test_matrix_level_seminorm_takes_the_worst_entry(unit_pair):
    zero = np.zeros((2, 2))
    z = join_blocks(np.array([[np.diag([1.0, -1.0]), zero], [zero, np.diag([3.0, 0.0])]]))
    assert eval_lip_n(unit_pair, 2, z).value == pytest.approx(3.0)


def test_action_lipnorm_satisfies_leibniz(torus3):
    report = check_f_leibniz(torus3, leibniz_rule, samples=40)
    assert report.passed, report.message
    assert report.details["evaluation"] == "complex_extension"


def test_complex_extension_lies_in_the_extended_bracket(torus3):
    rng = np.random.default_rng(4)
    for _ in range(5):
        x = torus3.system.random_element(rng)
        bracket = eval_lip_e(torus3, x, refine=False)
        assert bracket.lower - 1e-9 <= torus3.value(x) <= bracket.upper + 1e-9


def test_leibniz_needs_an_algebra():
    spin_half = OperatorSystem([np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]])])
    lip = FunctionalLip.from_functions(spin_half, [lambda b: b[0, 1] + b[1, 0]])
    with pytest.raises(InputError):
        check_f_leibniz(lip, leibniz_rule, samples=4)


def test_automorphisms_check_their_unitary():
    with pytest.raises(InputError):
        Automorphism(unitary=np.array([[2.0, 0.0], [0.0, 1.0]]))
    flip = Automorphism(unitary=np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert flip.preserves(OperatorSystem.two_point())


def test_specs_rebuild_the_seminorm(unit_pair, two_point):
    rebuilt = lipnorm_from_spec(two_point, ScaledLip(unit_pair, 2.0).to_spec())
    x = np.diag([1.5, -0.5])
    assert rebuilt.value(x) == pytest.approx(2.0 * unit_pair.value(x))
