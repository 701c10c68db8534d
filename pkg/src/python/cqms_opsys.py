"""
cqms - Operator Systems and Matrix States

Concrete operator systems inside M_k, completely positive maps into M_n
stored by their images of basis elements, and the correspondence between
such maps and positive functionals on M_n ⊗ X:

    sigma_phi((x_ij)) = (1/n) sum_ij phi(x_ij)_ij,    phi_sigma(x)_ij = n sigma(e_ij ⊗ x)
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence

import cvxpy as cp
import numpy as np
import scipy.linalg

from cqms_convex import solve
from cqms_logger import get_logger
from cqms_matrix import (
    as_matrix,
    hermitian_part,
    imaginary_part,
    inverse_sqrt_psd,
    min_eigenvalue,
    operator_norm,
    psd_tolerance,
    split_blocks,
)
from cqms_types import (
    CheckReport,
    CMatrix,
    InputError,
    LinearMapModel,
    NumericalFailure,
    OperatorSystemModel,
)

SPAN_TOL = 1e-10
UNITAL_TOL = 1e-9
ADJOINT_TOL = 1e-8
EXTENSION_TOL = 1e-7

logger = get_logger("opsys")


def _hermitian_vectors(mats: np.ndarray) -> np.ndarray:
    """Real vectors [Re vec, Im vec] of Hermitian matrices, one column each."""
    flat = mats.reshape(mats.shape[0], -1)
    return np.concatenate([flat.real, flat.imag], axis=1).T


def _orthonormal_hermitian_basis(stack: np.ndarray) -> np.ndarray:
    """
    Orthonormal basis (trace inner product) of the real span of the self-adjoint
    parts of a basis. The first element is 1/sqrt(k); the others are traceless.
    """
    m, k, _ = stack.shape
    h0 = np.eye(k, dtype=complex) / np.sqrt(k)
    if m == 1:
        return h0[None]
    parts = np.concatenate([[hermitian_part(b) for b in stack], [imaginary_part(b) for b in stack]])
    vectors = _hermitian_vectors(parts)
    u0 = _hermitian_vectors(h0[None])[:, 0]
    vectors = vectors - np.outer(u0, u0 @ vectors)
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    keep = s > SPAN_TOL * max(1.0, s[0])
    if int(keep.sum()) != m - 1:
        raise InputError(
            f"real span of self-adjoint parts has dimension {int(keep.sum()) + 1}, expected {m}; "
            "the basis does not span an adjoint-closed subspace"
        )
    u = u[:, keep]
    pivots = np.argmax(np.abs(u), axis=0)
    u = u * np.sign(u[pivots, np.arange(u.shape[1])])
    half = k * k
    herm = (u[:half].T + 1j * u[half:].T).reshape(-1, k, k)
    herm = 0.5 * (herm + herm.conj().transpose(0, 2, 1))
    return np.concatenate([h0[None], herm])


class OperatorSystem:
    """
    Unital adjoint-closed subspace of M_k given by a basis whose first element
    is the identity.

    Self-adjoint elements are addressed by real coordinates in an orthonormal
    Hermitian basis (hermitian_basis[0] = 1/sqrt(k)); every seminorm and convex
    program in the package works on these coordinates.
    """

    def __init__(self, basis: Sequence[object], name: str = "system"):
        mats = [as_matrix(b) for b in basis]
        if not mats:
            raise InputError("an operator system needs at least the identity")
        k = mats[0].shape[0]
        if any(mat.shape != (k, k) for mat in mats):
            raise InputError("basis elements must all be k x k matrices")
        stack = np.stack(mats)
        if operator_norm(stack[0] - np.eye(k)) > SPAN_TOL:
            raise InputError("basis[0] must be the identity matrix")

        vecs = stack.reshape(len(mats), k * k).T
        singular = np.linalg.svd(vecs, compute_uv=False)
        if singular[-1] <= SPAN_TOL * singular[0]:
            raise InputError("basis elements are linearly dependent")

        self.name = name
        self._k = k
        self._basis = stack
        self._basis.setflags(write=False)
        self._vecs = vecs
        self._pinv = np.linalg.pinv(vecs)

        for index, b in enumerate(stack):
            adjoint = b.conj().T
            if self._residual(adjoint) > SPAN_TOL * (1.0 + operator_norm(b)):
                raise InputError(f"adjoint of basis element {index} is not in the span")

        self._herm = _orthonormal_hermitian_basis(stack)
        self._herm.setflags(write=False)
        self._herm_coeffs = self._pinv @ self._herm.reshape(len(self._herm), k * k).T

    def _residual(self, x: np.ndarray) -> float:
        v = x.ravel()
        return float(np.linalg.norm(self._vecs @ (self._pinv @ v) - v))

    @property
    def ambient_dim(self) -> int:
        return self._k

    @property
    def dim(self) -> int:
        return self._basis.shape[0]

    @property
    def hermitian_dim(self) -> int:
        return self._herm.shape[0]

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    @property
    def hermitian_basis(self) -> np.ndarray:
        return self._herm

    @property
    def herm_coeffs(self) -> np.ndarray:
        """Coefficients of the Hermitian basis in the basis, shape (dim, hermitian_dim)."""
        return self._herm_coeffs

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self._k, dtype=complex)

    @property
    def unit_coords(self) -> np.ndarray:
        c = np.zeros(self.hermitian_dim)
        c[0] = np.sqrt(self._k)
        return c

    def contains(self, x: object) -> bool:
        m = as_matrix(x)
        if m.shape != (self._k, self._k):
            return False
        return self._residual(m) <= SPAN_TOL * (1.0 + operator_norm(m)) * 10

    def _check_member(self, m: np.ndarray) -> None:
        if m.shape != (self._k, self._k):
            raise InputError(f"element has shape {m.shape}, system lives in M_{self._k}")
        if self._residual(m) > 10 * SPAN_TOL * (1.0 + operator_norm(m)):
            raise InputError(f"element is not in the span of {self.name}")

    def coefficients(self, x: object) -> np.ndarray:
        """Complex coefficients of x in the basis."""
        m = as_matrix(x)
        self._check_member(m)
        return self._pinv @ m.ravel()

    def herm_coords(self, x: object) -> np.ndarray:
        """
        Coordinates of x in the Hermitian basis: real for self-adjoint x,
        complex (Re-coordinates + i Im-coordinates) otherwise.
        """
        m = as_matrix(x)
        self._check_member(m)
        c = np.einsum("aij,ji->a", self._herm, m)
        if np.allclose(c.imag, 0.0, atol=1e-13 * (1.0 + np.abs(c).max())):
            return c.real.copy()
        return c

    def from_herm_coords(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("a,aij->ij", np.asarray(c), self._herm)

    def random_hermitian(self, rng: np.random.Generator) -> np.ndarray:
        return self.from_herm_coords(rng.standard_normal(self.hermitian_dim))

    def random_element(self, rng: np.random.Generator) -> np.ndarray:
        c = rng.standard_normal(self.hermitian_dim) + 1j * rng.standard_normal(self.hermitian_dim)
        return self.from_herm_coords(c)

    def is_multiplicatively_closed(self) -> bool:
        if self.dim == self._k * self._k:
            return True
        for a in self._basis:
            for b in self._basis:
                prod = a @ b
                if self._residual(prod) > 10 * SPAN_TOL * (1.0 + operator_norm(prod)):
                    return False
        return True

    def is_full_algebra(self) -> bool:
        return self.dim == self._k * self._k

    def to_model(self) -> OperatorSystemModel:
        return OperatorSystemModel(ambient_dim=self._k,
                                   basis=[CMatrix.from_array(b) for b in self._basis])

    @classmethod
    def from_model(cls, model: OperatorSystemModel, name: str = "system") -> "OperatorSystem":
        basis = [b.to_array() for b in model.basis]
        if any(b.shape != (model.ambient_dim, model.ambient_dim) for b in basis):
            raise InputError("basis matrices do not match ambient_dim")
        return cls(basis, name=name)

    @classmethod
    def from_spanning_set(cls, mats: Sequence[object], name: str = "system") -> "OperatorSystem":
        """Greedy independent subset of {1} ∪ mats ∪ mats* (in that order)."""
        items = [as_matrix(m) for m in mats]
        k = items[0].shape[0] if items else 1
        chosen: List[np.ndarray] = [np.eye(k, dtype=complex)]
        for mat in items + [m.conj().T for m in items]:
            trial = np.stack(chosen + [mat]).reshape(len(chosen) + 1, -1).T
            s = np.linalg.svd(trial, compute_uv=False)
            if s[-1] > 1e-8 * s[0]:
                chosen.append(mat)
        return cls(chosen, name=name)

    @classmethod
    def full_matrix(cls, k: int) -> "OperatorSystem":
        units = []
        for i in range(k):
            for j in range(k):
                if (i, j) != (0, 0):
                    e = np.zeros((k, k), dtype=complex)
                    e[i, j] = 1.0
                    units.append(e)
        return cls([np.eye(k, dtype=complex)] + units, name=f"M{k}")

    @classmethod
    def diagonal(cls, k: int) -> "OperatorSystem":
        units = [np.diag(np.eye(k)[i]).astype(complex) for i in range(1, k)]
        return cls([np.eye(k, dtype=complex)] + units, name=f"diag{k}")

    @classmethod
    def two_point(cls) -> "OperatorSystem":
        return cls([np.eye(2, dtype=complex), np.diag([1.0, -1.0]).astype(complex)], name="two_point")

    @classmethod
    def one_point(cls) -> "OperatorSystem":
        return cls([np.eye(1, dtype=complex)], name="one_point")

    def __repr__(self) -> str:
        return f"OperatorSystem({self.name!r}, k={self._k}, dim={self.dim})"


class DirectSumSystem(OperatorSystem):
    """
    X ⊕ Y realized block-diagonally in M_{kX+kY}, with the coordinate maps
    between the summands' Hermitian coordinates and its own.
    """

    def __init__(self, x: OperatorSystem, y: OperatorSystem):
        kx, ky = x.ambient_dim, y.ambient_dim
        zx = np.zeros((kx, kx), dtype=complex)
        zy = np.zeros((ky, ky), dtype=complex)
        basis = [np.eye(kx + ky, dtype=complex), scipy.linalg.block_diag(x.identity, zy)]
        basis += [scipy.linalg.block_diag(b, zy) for b in x.basis[1:]]
        basis += [scipy.linalg.block_diag(zx, b) for b in y.basis[1:]]
        super().__init__(basis, name=f"{x.name}+{y.name}")
        self.x_system = x
        self.y_system = y

        herm = self.hermitian_basis
        self.proj_x = np.stack([x.herm_coords(h[:kx, :kx]) for h in herm], axis=1).real
        self.proj_y = np.stack([y.herm_coords(h[kx:, kx:]) for h in herm], axis=1).real
        self.embed_x = np.stack([self.herm_coords(self.pair(h, zy)) for h in x.hermitian_basis],
                                axis=1).real
        self.embed_y = np.stack([self.herm_coords(self.pair(zx, h)) for h in y.hermitian_basis],
                                axis=1).real

    def pair(self, a: object, b: object) -> np.ndarray:
        return scipy.linalg.block_diag(as_matrix(a), as_matrix(b))

    def split(self, z: object) -> tuple[np.ndarray, np.ndarray]:
        m = as_matrix(z)
        kx = self.x_system.ambient_dim
        return m[:kx, :kx], m[kx:, kx:]

    def pair_coords(self, cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
        return self.embed_x @ cx + self.embed_y @ cy


class CpMap:
    """
    Linear map from an operator system into M_n, stored as the images of the
    basis elements. Subclasses fix the normalization.
    """

    def __init__(self, source: OperatorSystem, images: object, certificate: str = "unverified"):
        arr = np.asarray(images, dtype=complex)
        if arr.ndim == 2 and source.dim == 1:
            arr = arr[None]
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1, 1)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise InputError(f"images must be a stack of square matrices, got shape {arr.shape}")
        if arr.shape[0] != source.dim:
            raise InputError(f"expected {source.dim} images, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise InputError("images have non-finite entries")
        self._source = source
        self._images = arr
        self._images.setflags(write=False)
        self.certificate = certificate
        self._validate()

    def _validate(self) -> None:
        """Positive maps send self-adjoint elements to self-adjoint elements."""
        for h in self.herm_images:
            if operator_norm(h - h.conj().T) > ADJOINT_TOL * (1.0 + operator_norm(h)):
                raise InputError("map does not preserve the adjoint")

    @property
    def source(self) -> OperatorSystem:
        return self._source

    @property
    def n(self) -> int:
        return self._images.shape[1]

    @property
    def images(self) -> np.ndarray:
        return self._images

    @property
    def unit_image(self) -> np.ndarray:
        return self._images[0]

    @cached_property
    def herm_images(self) -> np.ndarray:
        """Images of the Hermitian basis, shape (hermitian_dim, n, n)."""
        return np.einsum("ma,mij->aij", self._source.herm_coeffs, self._images)

    def apply(self, x: object) -> np.ndarray:
        return np.einsum("m,mij->ij", self._source.coefficients(x), self._images)

    def apply_coords(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("a,aij->ij", c, self.herm_images)

    def apply_blocks(self, z: object, levels: int) -> np.ndarray:
        """The amplification id_levels ⊗ phi applied to z in M_levels ⊗ X."""
        blocks = split_blocks(as_matrix(z), levels)
        out = np.empty((levels, levels, self.n, self.n), dtype=complex)
        for i in range(levels):
            for j in range(levels):
                out[i, j] = self.apply(blocks[i, j])
        return out.transpose(0, 2, 1, 3).reshape(levels * self.n, levels * self.n)

    def precompose(self, system: OperatorSystem, inner: Callable[[np.ndarray], np.ndarray]) -> "CpMap":
        """phi ∘ inner on another system, for a unital *-homomorphism or u.c.p. inner map."""
        images = np.stack([self.apply(inner(b)) for b in system.basis])
        return type(self)(system, images, certificate=f"{self.certificate}+composed")

    def basis_distance(self, other: "CpMap") -> float:
        return max(operator_norm(a - b) for a, b in zip(self._images, other.images))

    def to_model(self) -> LinearMapModel:
        return LinearMapModel(n=self.n, images=[CMatrix.from_array(a) for a in self._images])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(source={self._source.name!r}, n={self.n}, certificate={self.certificate!r})"


class UcpMap(CpMap):
    """Unital completely positive map X -> M_n."""

    def _validate(self) -> None:
        super()._validate()
        if operator_norm(self.unit_image - np.eye(self.n)) > UNITAL_TOL:
            raise InputError("u.c.p. map must send the identity to the identity")

    @classmethod
    def from_model(cls, source: OperatorSystem, model: LinearMapModel,
                   certificate: str = "document") -> "UcpMap":
        return cls(source, np.stack([m.to_array() for m in model.images]), certificate=certificate)


class ScpMap(CpMap):
    """Completely positive map whose associated functional sigma_phi is a state."""

    def _validate(self) -> None:
        super()._validate()
        unit = self.unit_image
        if min_eigenvalue(unit) < -psd_tolerance(unit):
            raise InputError("phi(1) must be positive")
        if abs(np.trace(unit).real / self.n - 1.0) > UNITAL_TOL:
            raise InputError("sigma_phi(1) must equal 1")
        if operator_norm(unit) > self.n ** 3 + UNITAL_TOL:
            raise InputError("||phi(1)|| exceeds n^3")

    def is_unital(self) -> bool:
        return operator_norm(self.unit_image - np.eye(self.n)) <= UNITAL_TOL

    def unitalized(self) -> UcpMap:
        """phi(1)^{-1/2} phi(.) phi(1)^{-1/2}; needs phi(1) invertible."""
        inv = inverse_sqrt_psd(self.unit_image)
        images = np.einsum("ij,mjk,kl->mil", inv, self._images, inv)
        images[0] = np.eye(self.n)
        return UcpMap(self._source, images, certificate=f"{self.certificate}+unitalized")


class MatrixState:
    """
    Linear functional on M_n ⊗ X, stored by its values on e_ij ⊗ b_m.
    """

    def __init__(self, source: OperatorSystem, coefficients: object):
        arr = np.asarray(coefficients, dtype=complex)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[2] != source.dim:
            raise InputError(f"coefficients must have shape (n, n, {source.dim}), got {arr.shape}")
        self.source = source
        self.coefficients = arr

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    def evaluate(self, z: object) -> complex:
        """sigma(z) for z in M_n ⊗ X given as an (n*k)x(n*k) matrix."""
        blocks = split_blocks(as_matrix(z), self.n)
        n, k = self.n, self.source.ambient_dim
        flat = blocks.reshape(n * n, k, k)
        coeffs = np.stack([self.source.coefficients(b) for b in flat]).reshape(n, n, -1)
        return complex(np.einsum("ijm,ijm->", self.coefficients, coeffs))

    def unit_value(self) -> complex:
        return complex(np.trace(self.coefficients[:, :, 0]))

    def random_hermitian_element(self, rng: np.random.Generator) -> np.ndarray:
        n, k = self.n, self.source.ambient_dim
        blocks = np.zeros((n, n, k, k), dtype=complex)
        for i in range(n):
            for j in range(i, n):
                if i == j:
                    blocks[i, i] = self.source.random_hermitian(rng)
                else:
                    blocks[i, j] = self.source.random_element(rng)
                    blocks[j, i] = blocks[i, j].conj().T
        return blocks.transpose(0, 2, 1, 3).reshape(n * k, n * k)

    def positivity_report(self, samples: int = 64, seed: int = 0) -> CheckReport:
        """
        Sampled positivity certificate: sigma(h) >= lambda_min(h) for random
        self-adjoint h in M_n ⊗ X, i.e. sigma(h - lambda_min(h) 1) >= 0.
        """
        rng = np.random.default_rng(seed)
        unit = self.unit_value()
        worst = np.inf
        for _ in range(samples):
            h = self.random_hermitian_element(rng)
            lam = min_eigenvalue(h)
            slack = self.evaluate(h).real - lam * unit.real
            worst = min(worst, slack / (1.0 + operator_norm(h)))
        if worst >= -UNITAL_TOL:
            return CheckReport.pass_report("state_positivity", details={"worst_slack": float(worst)})
        return CheckReport.fail_report("state_positivity", f"negative on a positive element ({worst:.3e})",
                                       {"worst_slack": float(worst)})


def state_of_ucp(phi: CpMap) -> MatrixState:
    """sigma_phi(e_ij ⊗ b_m) = phi(b_m)_ij / n."""
    return MatrixState(phi.source, phi.images.transpose(1, 2, 0) / phi.n)


def ucp_of_state(sigma: MatrixState, check: bool = True) -> ScpMap:
    """
    phi_sigma(x)_ij = n sigma(e_ij ⊗ x).

    Raises:
        InputError: if sigma is not a state
    """
    if check:
        if abs(sigma.unit_value() - 1.0) > UNITAL_TOL:
            raise InputError(f"functional is not unital: sigma(1) = {sigma.unit_value()}")
        report = sigma.positivity_report()
        if not report.passed:
            raise InputError(f"functional is not positive: {report.message}")
    images = sigma.n * sigma.coefficients.transpose(2, 0, 1)
    return ScpMap(sigma.source, images, certificate="state")


def random_ucp(system: OperatorSystem, n: int, seed: int) -> UcpMap:
    """
    Random u.c.p. map X -> M_n from a Gaussian-induced random state on M_n ⊗ M_k.

    The generator is numpy's default_rng(seed); the state is G G*/tr(G G*) for
    a complex Ginibre matrix G of size nk. Restricting to M_n ⊗ X and applying
    the state-to-map correspondence gives a c.p. map, which is unitalized by
    phi(1)^{-1/2} phi phi(1)^{-1/2}. A singular phi(1) is avoided by mixing the
    state with the maximally mixed one.
    """
    if n < 1:
        raise InputError("level n must be positive")
    rng = np.random.default_rng(seed)
    k = system.ambient_dim
    size = n * k
    g = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real

    mix = 0.0
    for _ in range(20):
        state = (1.0 - mix) * rho + mix * np.eye(size) / size
        r = state.reshape(n, k, n, k)
        images = n * np.einsum("jbia,mab->mij", r, system.basis)
        unit = hermitian_part(images[0])
        values = np.linalg.eigvalsh(unit)
        if values[0] > 1e-10 * values[-1]:
            break
        mix = 1e-3 if mix == 0.0 else 2 * mix
        logger.debug(f"random_ucp: phi(1) nearly singular, mixing with weight {mix}")
    inv = inverse_sqrt_psd(unit)
    images = np.einsum("ij,mjk,kl->mil", inv, images, inv)
    images[0] = np.eye(n)
    return UcpMap(system, images, certificate="ambient-state")


def scalar_embedding(state: CpMap, n: int) -> UcpMap:
    """x -> omega(x) 1_n for a state omega given as a level-1 map."""
    if state.n != 1:
        raise InputError("scalar embedding needs a state (level-1 map)")
    images = state.images[:, 0, 0][:, None, None] * np.eye(n)[None]
    return UcpMap(state.source, images, certificate=f"{state.certificate}+scalar")


def compression(system: OperatorSystem, isometry: np.ndarray) -> UcpMap:
    """x -> V* x V for an isometry V: C^n -> C^k."""
    v = np.asarray(isometry, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    if operator_norm(v.conj().T @ v - np.eye(v.shape[1])) > 1e-9:
        raise InputError("compression needs an isometry")
    images = np.einsum("ai,mab,bj->mij", v.conj(), system.basis, v)
    images[0] = np.eye(v.shape[1])
    return UcpMap(system, images, certificate="compression")


def vector_state(system: OperatorSystem, vector: np.ndarray) -> UcpMap:
    xi = np.asarray(vector, dtype=complex)
    return compression(system, xi / np.linalg.norm(xi))


def trace_state(system: OperatorSystem) -> UcpMap:
    """The normalized trace of the ambient algebra, restricted to the system."""
    k = system.ambient_dim
    images = np.array([np.trace(b) / k for b in system.basis]).reshape(-1, 1, 1)
    return UcpMap(system, images, certificate="trace")


@dataclass(frozen=True)
class ExtensionResult:
    """Outcome of extending a u.c.p. map from X to all of M_k."""
    ucp: Optional[UcpMap]
    restriction_error: float
    psd_margin: float
    status: str

    @property
    def succeeded(self) -> bool:
        return self.status in ("exact", "extended")


def _choi_action(choi: np.ndarray, x: np.ndarray, n: int) -> np.ndarray:
    k = x.shape[0]
    blocks = choi.reshape(k, n, k, n).transpose(0, 2, 1, 3)
    return np.einsum("ab,abij->ij", x, blocks)


def _project_choi(choi: np.ndarray, basis: np.ndarray, images: np.ndarray) -> np.ndarray:
    """Least-change correction of a Choi matrix onto the affine set {Phi(b_m) = images[m]}."""
    m, k, _ = basis.shape
    n = images.shape[1]
    size = k * n
    rows = []
    rhs = []
    index = np.arange(size * size).reshape(size, size)
    for mm in range(m):
        for i in range(n):
            for j in range(n):
                row = np.zeros(size * size, dtype=complex)
                for a in range(k):
                    for c in range(k):
                        if basis[mm, a, c] != 0:
                            row[index[a * n + i, c * n + j]] += basis[mm, a, c]
                rows.append(row)
                rhs.append(images[mm, i, j])
    a_mat = np.array(rows)
    residual = np.array(rhs) - a_mat @ choi.ravel()
    delta, *_ = np.linalg.lstsq(a_mat, residual, rcond=None)
    corrected = choi + delta.reshape(size, size)
    return hermitian_part(corrected)


def extend_to_ambient(phi: UcpMap) -> ExtensionResult:
    """
    Extend a u.c.p. map on X ⊂ M_k to a u.c.p. map on M_k.

    The search maximizes the smallest eigenvalue of a Choi matrix constrained to
    agree with phi on the basis, then projects the result back onto the affine
    constraints exactly and re-checks positivity with the uniform tolerance.
    """
    system = phi.source
    k, n = system.ambient_dim, phi.n
    full = OperatorSystem.full_matrix(k)

    if system.is_full_algebra():
        images = np.stack([phi.apply(b) for b in full.basis])
        return ExtensionResult(UcpMap(full, images, certificate=phi.certificate), 0.0, 0.0, "exact")

    size = k * n
    choi = cp.Variable((size, size), hermitian=True)
    margin = cp.Variable()
    constraints = [choi - margin * np.eye(size) >> 0]
    for b, image in zip(system.basis, phi.images):
        expr = 0
        for a in range(k):
            for c in range(k):
                if b[a, c] != 0:
                    expr = expr + complex(b[a, c]) * choi[a * n:(a + 1) * n, c * n:(c + 1) * n]
        constraints.append(expr == image)
    problem = cp.Problem(cp.Maximize(margin), constraints)
    try:
        solve(problem, "extend_to_ambient")
    except NumericalFailure as exc:
        logger.warning(f"extension search failed: {exc}")
        return ExtensionResult(None, np.inf, -np.inf, "heuristic-failure")

    value = _project_choi(np.asarray(choi.value), system.basis, phi.images)
    error = max(operator_norm(_choi_action(value, b, n) - image)
                for b, image in zip(system.basis, phi.images))
    lam = min_eigenvalue(value)
    if error > EXTENSION_TOL or lam < -psd_tolerance(value):
        logger.warning(f"extension rejected: restriction error {error:.2e}, min eigenvalue {lam:.2e}")
        return ExtensionResult(None, float(error), float(lam), "heuristic-failure")
    images = np.stack([_choi_action(value, b, n) for b in full.basis])
    images[0] = np.eye(n)
    return ExtensionResult(UcpMap(full, images, certificate="choi"), float(error), float(lam), "extended")
