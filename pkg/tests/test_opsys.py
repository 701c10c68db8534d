import numpy as np
import pytest
from numpy.testing import assert_allclose

from cqms_matrix import operator_norm
from cqms_opsys import (
    DirectSumSystem,
    MatrixState,
    OperatorSystem,
    ScpMap,
    UcpMap,
    compression,
    extend_to_ambient,
    random_ucp,
    scalar_embedding,
    state_of_ucp,
    trace_state,
    ucp_of_state,
)
from cqms_types import InputError


class TestOperatorSystem:
    def test_first_basis_element_must_be_the_identity(self):
        with pytest.raises(InputError):
            OperatorSystem([np.diag([1.0, -1.0]), np.eye(2)])

    def test_dependent_basis_is_rejected(self):
        with pytest.raises(InputError):
            OperatorSystem([np.eye(2), np.diag([1.0, 0.0]), np.diag([2.0, 0.0])])

    def test_basis_must_be_adjoint_closed(self):
        upper = np.array([[0, 1], [0, 0]], dtype=complex)
        with pytest.raises(InputError):
            OperatorSystem([np.eye(2), upper])
        assert OperatorSystem.from_spanning_set([upper]).dim == 3

    def test_hermitian_basis_starts_with_normalized_identity(self, two_point):
        assert two_point.dim == 2
        assert two_point.hermitian_dim == 2
        assert_allclose(two_point.hermitian_basis[0], np.eye(2) / np.sqrt(2))
        assert_allclose(two_point.from_herm_coords(two_point.unit_coords), np.eye(2))

    def test_coordinates_round_trip(self, rng):
        system = OperatorSystem.full_matrix(3)
        x = system.random_hermitian(rng)
        c = system.herm_coords(x)
        assert np.isrealobj(c)
        assert_allclose(system.from_herm_coords(c), x, atol=1e-12)
        z = system.random_element(rng)
        assert np.iscomplexobj(system.herm_coords(z))

    def test_membership(self, two_point):
        assert two_point.contains(np.diag([3.0, 5.0]))
        assert not two_point.contains(np.array([[0, 1], [1, 0]]))
        with pytest.raises(InputError):
            two_point.herm_coords(np.array([[0, 1], [1, 0]]))

    def test_closure_under_products(self, two_point):
        assert two_point.is_multiplicatively_closed()
        assert OperatorSystem.full_matrix(2).is_full_algebra()
        spin_half = OperatorSystem([np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]])])
        assert not spin_half.is_multiplicatively_closed()

    def test_model_round_trip(self, two_point):
        again = OperatorSystem.from_model(two_point.to_model())
        assert_allclose(again.basis, two_point.basis)

    def test_direct_sum_pairs_and_splits(self, two_point):
        total = DirectSumSystem(two_point, OperatorSystem.one_point())
        assert total.ambient_dim == 3
        assert total.dim == 3
        a, b = np.diag([1.0, 2.0]), np.array([[7.0]])
        x, y = total.split(total.pair(a, b))
        assert_allclose(x, a)
        assert_allclose(y, b)
        coords = total.pair_coords(two_point.herm_coords(a), np.array([7.0]))
        assert_allclose(total.from_herm_coords(coords), total.pair(a, b), atol=1e-12)


class TestMaps:
    def test_ucp_maps_must_be_unital(self, two_point):
        with pytest.raises(InputError):
            UcpMap(two_point, [2.0, 0.0])

    def test_maps_must_preserve_the_adjoint(self, two_point):
        with pytest.raises(InputError):
            UcpMap(two_point, [1.0, 1j])
        with pytest.raises(InputError):
            ScpMap(two_point, [1.0, 0.5j])

    def test_trace_state(self, two_point):
        tau = trace_state(two_point)
        assert tau.n == 1
        assert tau.apply(np.diag([3.0, 1.0]))[0, 0] == pytest.approx(2.0)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_state_correspondence_round_trip(self, n):
        system = OperatorSystem.full_matrix(2)
        for seed in range(5):
            phi = random_ucp(system, n, seed)
            sigma = state_of_ucp(phi)
            assert sigma.unit_value() == pytest.approx(1.0)
            assert phi.basis_distance(ucp_of_state(sigma)) <= 1e-12

    def test_random_ucp_is_seeded(self, two_point):
        first, again = random_ucp(two_point, 2, 7), random_ucp(two_point, 2, 7)
        assert_allclose(first.images, again.images)
        assert operator_norm(first.unit_image - np.eye(2)) <= 1e-12

    def test_state_positivity_is_checked(self, two_point):
        sigma = state_of_ucp(trace_state(two_point))
        assert sigma.positivity_report().passed
        bad = MatrixState(two_point, np.array([[[1.0, 3.0]]]))
        with pytest.raises(InputError):
            ucp_of_state(bad)

    def test_compressions_and_scalar_embeddings(self, two_point):
        v = compression(OperatorSystem.full_matrix(2), np.array([1.0, 0.0]))
        assert v.apply(np.array([[5.0, 1.0], [1.0, 2.0]]))[0, 0] == pytest.approx(5.0)
        lifted = scalar_embedding(trace_state(two_point), 3)
        assert_allclose(lifted.apply(np.diag([4.0, 2.0])), 3.0 * np.eye(3))
        with pytest.raises(InputError):
            compression(two_point, np.array([[1.0, 1.0], [0.0, 0.0]]))


class TestExtension:
    def test_full_algebra_extends_exactly(self):
        phi = random_ucp(OperatorSystem.full_matrix(2), 2, 3)
        result = extend_to_ambient(phi)
        assert result.status == "exact"
        assert result.succeeded

    def test_diagonal_state_extends(self, two_point):
        result = extend_to_ambient(random_ucp(two_point, 2, 5))
        assert result.succeeded
        assert result.status == "extended"
        assert result.restriction_error <= 1e-7
        restricted = np.stack([result.ucp.apply(b) for b in two_point.basis])
        assert_allclose(restricted, random_ucp(two_point, 2, 5).images, atol=1e-6)
