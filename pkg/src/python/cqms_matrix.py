"""
cqms - Matrix Core

Dense complex linear algebra shared by every other module: norms, Hermitian
eigendecompositions, Kronecker products with the block convention used for
M_n ⊗ X, and the single positivity tolerance.
"""

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import scipy.linalg

from cqms_types import CMatrix, InputError

HERMITIAN_TOL = 1e-10
PSD_RTOL = 1e-9


def as_matrix(a: Any) -> np.ndarray:
    """
    Coerce a CMatrix document or array-like into a finite complex 2-d array.

    Raises:
        InputError: if the entries are not finite or the shape is not 2-d
    """
    if isinstance(a, CMatrix):
        return a.to_array()
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise InputError(f"expected a matrix, got an array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("matrix has non-finite entries")
    return arr


def operator_norm(a: Any) -> float:
    """Largest singular value."""
    m = as_matrix(a)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


@dataclass(frozen=True)
class HermitianDecomposition:
    """Ascending eigenvalues and a unitary of eigenvectors (as columns)."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])


def is_hermitian(a: Any, tol: Optional[float] = None) -> bool:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        return False
    limit = HERMITIAN_TOL * (1.0 + operator_norm(m)) if tol is None else tol
    return operator_norm(m - m.conj().T) <= limit


def eigh(a: Any) -> HermitianDecomposition:
    """
    Eigendecomposition of a Hermitian matrix.

    Raises:
        InputError: if a is not Hermitian within 1e-10 (relative to its norm)
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise InputError(f"eigh needs a square matrix, got {m.shape}")
    if not is_hermitian(m):
        raise InputError("eigh needs a Hermitian matrix")
    values, vectors = scipy.linalg.eigh(hermitian_part(m))
    return HermitianDecomposition(eigenvalues=values, eigenvectors=vectors)


def kron(a: Any, b: Any) -> np.ndarray:
    """Kronecker product: entry (i*p+k, j*q+l) is a[i,j]*b[k,l]."""
    return np.kron(as_matrix(a), as_matrix(b))


def psd_tolerance(a: np.ndarray) -> float:
    """The positivity tolerance used by every module: 1e-9*(1+||a||)."""
    return PSD_RTOL * (1.0 + operator_norm(a))


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(as_matrix(a)))[0])


def is_psd(a: Any) -> bool:
    m = as_matrix(a)
    if not is_hermitian(m):
        return False
    return min_eigenvalue(m) >= -psd_tolerance(m)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Re(a) = (a + a*)/2."""
    return 0.5 * (a + a.conj().T)


def imaginary_part(a: np.ndarray) -> np.ndarray:
    """Im(a) = (a - a*)/(2i), so that a = Re(a) + i Im(a)."""
    return (a - a.conj().T) / 2j


def realify(a: np.ndarray) -> np.ndarray:
    """Real representation [[Re, -Im], [Im, Re]] of a complex matrix; preserves the operator norm."""
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def inverse_sqrt_psd(a: np.ndarray) -> np.ndarray:
    """a^{-1/2} for a positive definite a."""
    values, vectors = np.linalg.eigh(hermitian_part(a))
    if values[0] <= 0:
        raise InputError("matrix is not positive definite")
    return (vectors / np.sqrt(values)) @ vectors.conj().T


def sqrt_psd(a: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(hermitian_part(a))
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.conj().T


def matrix_unit(n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1.0
    return e


def split_blocks(x: np.ndarray, n: int) -> np.ndarray:
    """View an (n*k)x(n*k) matrix as its n x n array of k x k blocks, shape (n, n, k, k)."""
    size = x.shape[0]
    if x.shape != (size, size) or size % n:
        raise InputError(f"cannot split a {x.shape} matrix into {n}x{n} blocks")
    k = size // n
    return x.reshape(n, k, n, k).transpose(0, 2, 1, 3)


def join_blocks(blocks: np.ndarray) -> np.ndarray:
    """Inverse of split_blocks."""
    n, _, k, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(n * k, n * k)


def random_hermitian(rng: np.random.Generator, k: int) -> np.ndarray:
    g = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    return 0.5 * (g + g.conj().T)


def random_unit_vectors(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    """Gaussian-normalized complex unit vectors, shape (count, n)."""
    v = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
