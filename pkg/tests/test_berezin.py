import numpy as np
import pytest
from numpy.testing import assert_allclose

from cqms_berezin import (
    CoherentProjection,
    CovariantSymbolFunction,
    SphereGrid,
    SpinRep,
    berezin_residual,
    berezin_row,
    bridge_gamma_estimate,
    contravariant_symbol,
    covariant_symbol,
    lip_one_matrices,
    matrix_level_bound_check,
    rotation_samples,
    sphere_lip_norms,
    symbol_property_report,
)
from cqms_types import EstimateKind, InputError


@pytest.fixture(scope="module")
def grid() -> SphereGrid:
    return SphereGrid(16, 32)


@pytest.mark.parametrize("j", [0.5, 1.0, 2.5])
def test_spin_generators_satisfy_the_angular_momentum_relations(j):
    rep = SpinRep(j)
    assert rep.dim == int(2 * j) + 1
    assert max(rep.relation_defects().values()) <= 1e-10


def test_spins_must_be_half_integers():
    with pytest.raises(InputError):
        SpinRep(0.3)


def test_highest_weight_projection(grid):
    defects = CoherentProjection.highest_weight(SpinRep(1.5)).defects(SpinRep(1.5))
    assert max(defects.values()) <= 1e-12


def test_grid_weights_are_normalized(grid):
    assert grid.weights.sum() == pytest.approx(1.0)
    assert grid.integrate(grid.points[:, 2] ** 2).real == pytest.approx(1.0 / 3.0)


def test_symbols_of_the_unit(grid):
    rep = SpinRep(2.0)
    assert_allclose(covariant_symbol(np.eye(rep.dim), rep, grid), 1.0, atol=1e-12)
    assert_allclose(contravariant_symbol(np.ones(len(grid)), rep, grid), np.eye(rep.dim), atol=1e-10)


def test_covariant_symbol_of_jz_is_the_height(grid):
    rep = SpinRep(1.5)
    assert_allclose(covariant_symbol(rep.jz, rep, grid).real, rep.j * grid.points[:, 2], atol=1e-12)


@pytest.mark.parametrize("j", [0.5, 1.0, 2.0])
def test_berezin_transform_shrinks_jz(grid, j):
    rep = SpinRep(j)
    assert berezin_residual(rep.jz / rep.j, rep, grid) == pytest.approx(1.0 / (j + 1.0), abs=1e-9)


def test_symbol_maps_are_unital_and_positive(grid):
    report = symbol_property_report(SpinRep(1.0), grid, samples=3, seed=0)
    assert report.passed, report.message


def test_rotation_lip_norms_vanish_on_scalars(grid):
    rep = SpinRep(1.0)
    lip_a, lip_b = sphere_lip_norms(rep, grid, rotation_samples(3, seed=0))
    assert lip_b.value(np.eye(rep.dim)) == 0.0
    assert lip_b.value(rep.jz) > 0.0
    assert lip_a.value(lambda points: points[:, 2]) > 0.0


def test_sweep_row(grid):
    row = berezin_row(1.0, grid, rotations=3, samples=2, seed=0)
    assert set(row) == {"j", "dim", "gamma_hat", "max_residual", "upper_bound"}
    assert row["dim"] == 3
    assert row["upper_bound"] == pytest.approx(row["gamma_hat"] + row["max_residual"])


def test_bridge_gamma_is_a_heuristic_with_its_distance_bound(grid):
    rep = SpinRep(1.0)
    lip_a, lip_b = sphere_lip_norms(rep, grid, rotation_samples(3, seed=0))
    est = bridge_gamma_estimate(rep, grid, lip_a, lip_b, samples=2, seed=0)
    assert est.kind == EstimateKind.HEURISTIC
    assert est.value >= 0.0
    assert est.params["distance_upper"] == pytest.approx(est.value + est.params["max_residual"])
    assert est == bridge_gamma_estimate(rep, grid, lip_a, lip_b, samples=2, seed=0)


def test_symbols_of_lip_one_matrices_stay_in_the_unit_ball(grid):
    rep = SpinRep(2.0)
    lip_a, lip_b = sphere_lip_norms(rep, grid, rotation_samples(4, seed=2))
    for t in lip_one_matrices(rep, lip_b, 3, seed=5):
        assert lip_a.value(CovariantSymbolFunction(t, rep)) <= 1.0 + 1e-9
    est = bridge_gamma_estimate(rep, grid, lip_a, lip_b, samples=3, seed=5)
    assert est.params["symbol_lip_excess"] <= 1e-9


def test_ucp_maps_do_not_enlarge_the_symbol_gap(grid):
    rep = SpinRep(1.5)
    lip_a, lip_b = sphere_lip_norms(rep, grid, rotation_samples(3, seed=1))
    report = matrix_level_bound_check(rep, grid, lip_a, lip_b, levels=(1, 2), maps=2, samples=2, seed=4)
    assert report.passed, report.message
