import numpy as np
import pytest

from cqms_lipnorms import ScaledLip
from cqms_metrics import (
    check_diambound,
    compose_norm_bridges,
    derive_seeds,
    diameter,
    diameter_upper_bound,
    dist_upper,
    hausdorff_ucp,
    make_admissible,
    make_norm_bridge,
    make_point_bridge,
    make_scaling_bridge,
    match_ucp,
    rho_ln,
    two_point_lipnorm,
    validate_bridge,
    zero_lipnorm,
)
from cqms_opsys import OperatorSystem, UcpMap, random_ucp, trace_state
from cqms_types import EstimateKind, InputError, ValidationFailure


def two_point_state(weight: float) -> UcpMap:
    """The state giving the first point probability `weight`."""
    return UcpMap(OperatorSystem.two_point(), [1.0, 2.0 * weight - 1.0])


def test_child_seeds_are_reproducible_and_distinct():
    seeds = derive_seeds(42, 4)
    assert seeds == derive_seeds(42, 4)
    assert len(set(seeds)) == 4
    assert seeds != derive_seeds(43, 4)


@pytest.mark.parametrize("d,a,b", [(1.0, 0.2, 0.7), (2.5, 0.0, 1.0), (0.3, 0.9, 0.4)])
def test_two_point_state_distance_has_a_closed_form(d, a, b):
    lip = two_point_lipnorm(d)
    est = rho_ln(lip, two_point_state(a), two_point_state(b))
    assert est.kind == EstimateKind.EXACT
    assert est.value == pytest.approx(d * abs(a - b), rel=1e-12)


def test_searched_distance_agrees_with_the_closed_form():
    lip = two_point_lipnorm(1.5)
    est = rho_ln(lip, two_point_state(0.1), two_point_state(0.8), method="search")
    assert est.value == pytest.approx(1.5 * 0.7, rel=1e-6)


def test_distance_to_itself_vanishes(unit_pair):
    phi = random_ucp(unit_pair.system, 2, 0)
    assert rho_ln(unit_pair, phi, phi).value == 0.0


def test_maps_on_other_systems_are_rejected(unit_pair):
    other = trace_state(OperatorSystem.full_matrix(2))
    with pytest.raises(InputError):
        rho_ln(unit_pair, other, other)


def test_diameter_of_two_points():
    lip = two_point_lipnorm(2.0)
    assert diameter_upper_bound(lip) == pytest.approx(2.0)
    assert diameter_upper_bound(ScaledLip(lip, 4.0)) == pytest.approx(0.5)
    est = diameter(lip, n=1, net_size=4, seed=0)
    assert est.value == pytest.approx(2.0, rel=1e-6)


def test_diameter_of_a_torus_is_bounded_by_twice_the_mean_length(torus3):
    upper = diameter_upper_bound(torus3)
    assert upper == pytest.approx(2.0 * torus3.mean_length())
    est = diameter(torus3, n=1, net_size=4, seed=0)
    assert est.value <= upper + 1e-6


def test_scaling_bridge_gives_constant_over_lambda(unit_pair):
    point = zero_lipnorm(OperatorSystem.one_point())
    est = dist_upper(ScaledLip(unit_pair, 4.0), point, make_scaling_bridge(4.0, 1.0), n_max=1)
    assert est.kind == EstimateKind.UPPER
    assert est.value == pytest.approx(0.25)


def test_norm_bridge_between_nearby_pairs(unit_pair):
    near = two_point_lipnorm(1.1)
    report = validate_bridge(make_norm_bridge(0.1), unit_pair, near)
    assert report.passed, report.message
    assert dist_upper(unit_pair, near, make_norm_bridge(0.1), n_max=1).value == pytest.approx(0.1)


def test_too_tight_norm_bridge_fails_validation(unit_pair):
    far = two_point_lipnorm(2.0)
    assert not validate_bridge(make_norm_bridge(0.001), unit_pair, far).passed
    with pytest.raises(ValidationFailure):
        dist_upper(unit_pair, far, make_norm_bridge(0.001), n_max=1)


def test_point_bridge_bound_adds_the_diameters(unit_pair):
    other = two_point_lipnorm(2.0)
    bridge = make_point_bridge(0.2, trace_state(unit_pair.system), trace_state(other.system), (1.0, 2.0))
    assert bridge.analytic_bound() == pytest.approx(3.2)
    assert validate_bridge(bridge, unit_pair, other).passed


def test_composed_norm_bridges_add_up():
    assert compose_norm_bridges(make_norm_bridge(0.1), make_norm_bridge(0.2)).epsilon == pytest.approx(0.3)
    with pytest.raises(InputError):
        make_norm_bridge(0.0)


def test_matching_a_state_across_a_valid_bridge(unit_pair):
    admissible = make_admissible(unit_pair, two_point_lipnorm(1.1), make_norm_bridge(0.1))
    assert admissible.certificate.passed
    result = match_ucp(two_point_state(0.3), admissible, rounds=2)
    assert result.psi.n == 1
    assert result.estimate.value >= result.sdp_lower - 1e-4
    with pytest.raises(InputError):
        match_ucp(trace_state(OperatorSystem.full_matrix(2)), admissible)


def test_hausdorff_estimate_is_a_heuristic_bracket(unit_pair):
    admissible = make_admissible(unit_pair, two_point_lipnorm(1.1), make_norm_bridge(0.1))
    est = hausdorff_ucp(admissible, 1, net_size=2, rounds=1)
    assert est.kind == EstimateKind.HEURISTIC
    assert not est.certified
    lower, upper = est.bracket
    assert 0.0 <= lower <= upper == est.value


def test_hausdorff_needs_a_valid_bridge(unit_pair):
    admissible = make_admissible(unit_pair, two_point_lipnorm(2.0), make_norm_bridge(0.001))
    with pytest.raises(InputError):
        hausdorff_ucp(admissible, 1)


def test_neighborhood_bounds_around_a_positive_anchor(unit_pair):
    admissible = make_admissible(unit_pair, two_point_lipnorm(1.1), make_norm_bridge(0.1))
    anchor = np.diag([1.05, 0.05])
    with pytest.raises(InputError):
        check_diambound(admissible, 1, anchor, 1.5, 0.1)
    report = check_diambound(admissible, 1, anchor, 3.0, 0.1, samples=3, seed=5)
    assert report.passed or report.inconclusive, report.message
