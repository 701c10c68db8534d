import numpy as np
import pytest
from numpy.testing import assert_allclose

from cqms_matrix import (
    as_matrix,
    eigh,
    is_hermitian,
    is_psd,
    join_blocks,
    kron,
    matrix_unit,
    operator_norm,
    random_hermitian,
    split_blocks,
    sqrt_psd,
)
from cqms_types import InputError

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def test_operator_norm_of_identity_and_diagonal():
    assert operator_norm(np.eye(3)) == pytest.approx(1.0)
    assert operator_norm(np.diag([2.0, -5.0])) == pytest.approx(5.0)


def test_eigh_sorts_eigenvalues():
    dec = eigh(PAULI_X)
    assert_allclose(dec.eigenvalues, [-1.0, 1.0], atol=1e-12)
    assert dec.min == pytest.approx(-1.0)
    assert dec.max == pytest.approx(1.0)


def test_eigh_rejects_non_hermitian():
    with pytest.raises(InputError):
        eigh(np.array([[0, 1], [0, 0]]))


def test_non_finite_entries_are_rejected():
    with pytest.raises(InputError):
        as_matrix(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_kron_with_identity_is_block_diagonal(rng):
    a = random_hermitian(rng, 3)
    blocks = split_blocks(kron(np.eye(2), a), 2)
    assert_allclose(blocks[0, 0], a)
    assert_allclose(blocks[1, 1], a)
    assert_allclose(blocks[0, 1], np.zeros((3, 3)))


def test_kron_is_multiplicative_in_norm(rng):
    a, b = random_hermitian(rng, 2), random_hermitian(rng, 3)
    assert operator_norm(kron(a, b)) == pytest.approx(operator_norm(a) * operator_norm(b))


def test_kron_of_matrix_units():
    e = kron(matrix_unit(2, 0, 0), matrix_unit(2, 0, 0))
    expected = np.zeros((4, 4))
    expected[0, 0] = 1.0
    assert_allclose(e, expected)


def test_split_and_join_blocks_are_inverse(rng):
    x = rng.standard_normal((6, 6))
    assert_allclose(join_blocks(split_blocks(x, 3)), x)
    with pytest.raises(InputError):
        split_blocks(np.eye(5), 2)


def test_positivity_helpers(rng):
    h = random_hermitian(rng, 4)
    assert is_hermitian(h)
    g = h @ h
    assert is_psd(g)
    assert not is_psd(-np.eye(2))
    root = sqrt_psd(g)
    assert_allclose(root @ root, g, atol=1e-10)
