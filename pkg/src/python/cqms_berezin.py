"""
cqms - Berezin Quantization of the Sphere

Spin-j representations of SU(2), coherent-state projections, covariant and
contravariant symbols, and the rotation-induced Lip-norms on functions on the
sphere and on M_{2j+1}.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial.transform import Rotation
from scipy.special import comb

from cqms_lipnorms import ActionLip, Automorphism
from cqms_logger import get_logger
from cqms_matrix import inverse_sqrt_psd, min_eigenvalue, operator_norm
from cqms_metrics import derive_seeds
from cqms_opsys import OperatorSystem
from cqms_types import CheckReport, CMatrix, EstimateKind, InputError, MetricEstimate, Witness

logger = get_logger("berezin")

SphereFunction = Callable[[np.ndarray], np.ndarray]

# Rounding allowed in L_A(sigma_T) <= L_B(T)
SYMBOL_LIP_TOL = 1e-9


class SpinRep:
    """
    Irreducible spin-j representation; basis index i carries J_z eigenvalue j - i.
    """

    def __init__(self, j: float):
        twice = 2 * j
        if j < 0 or abs(twice - round(twice)) > 1e-12:
            raise InputError(f"spin must be a nonnegative half-integer, got {j}")
        self.j = round(twice) / 2
        self.dim = round(twice) + 1
        self.m = self.j - np.arange(self.dim)
        raising = np.zeros((self.dim, self.dim), dtype=complex)
        for i in range(self.dim - 1):
            m = self.m[i + 1]
            raising[i, i + 1] = np.sqrt(self.j * (self.j + 1) - m * (m + 1))
        lowering = raising.conj().T
        self.jx = (raising + lowering) / 2
        self.jy = (raising - lowering) / 2j
        self.jz = np.diag(self.m).astype(complex)

    @property
    def generators(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.jx, self.jy, self.jz

    def rotation(self, rotation: Rotation) -> np.ndarray:
        """exp(-i theta n·J) for the rotation by theta about n."""
        v = rotation.as_rotvec()
        return scipy.linalg.expm(-1j * (v[0] * self.jx + v[1] * self.jy + v[2] * self.jz))

    def rotation_euler(self, alpha: float, beta: float, gamma: float) -> np.ndarray:
        """exp(-i alpha J_z) exp(-i beta J_y) exp(-i gamma J_z)."""
        return (scipy.linalg.expm(-1j * alpha * self.jz) @ scipy.linalg.expm(-1j * beta * self.jy)
                @ scipy.linalg.expm(-1j * gamma * self.jz))

    def coherent_vectors(self, points: np.ndarray) -> np.ndarray:
        """Coherent states at unit vectors, shape (N, dim); highest weight at the north pole."""
        pts = np.atleast_2d(points)
        theta = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        up = self.j + self.m
        down = self.j - self.m
        amplitude = (np.sqrt(comb(2 * self.j, up))[None, :]
                     * np.cos(theta / 2)[:, None] ** up[None, :]
                     * np.sin(theta / 2)[:, None] ** down[None, :])
        return amplitude * np.exp(-1j * np.outer(phi, self.m))

    def relation_defects(self) -> Dict[str, float]:
        jx, jy, jz = self.generators
        casimir = jx @ jx + jy @ jy + jz @ jz
        return {
            "[Jx,Jy]-iJz": operator_norm(jx @ jy - jy @ jx - 1j * jz),
            "[Jy,Jz]-iJx": operator_norm(jy @ jz - jz @ jy - 1j * jx),
            "[Jz,Jx]-iJy": operator_norm(jz @ jx - jx @ jz - 1j * jy),
            "casimir": operator_norm(casimir - self.j * (self.j + 1) * np.eye(self.dim)),
        }


@dataclass(frozen=True)
class CoherentProjection:
    """Rank-one projection onto the highest-weight vector."""
    matrix: np.ndarray

    @classmethod
    def highest_weight(cls, rep: SpinRep) -> "CoherentProjection":
        p = np.zeros((rep.dim, rep.dim), dtype=complex)
        p[0, 0] = 1.0
        return cls(p)

    def defects(self, rep: SpinRep, angle: float = 0.7) -> Dict[str, float]:
        p = self.matrix
        u = scipy.linalg.expm(-1j * angle * rep.jz)
        return {
            "idempotent": operator_norm(p @ p - p),
            "selfadjoint": operator_norm(p - p.conj().T),
            "trace": abs(np.trace(p) - 1.0),
            "z_stability": operator_norm(u @ p @ u.conj().T - p),
        }


class SphereGrid:
    """
    Product quadrature on S^2: Gauss-Legendre in cos(theta) times uniform in phi,
    with weights summing to 1.
    """

    def __init__(self, n_theta: int = 24, n_phi: int = 48):
        if n_theta < 1 or n_phi < 1:
            raise InputError("grid sizes must be positive")
        nodes, weights = np.polynomial.legendre.leggauss(n_theta)
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        cos_t, ph = np.meshgrid(nodes, phi, indexing="ij")
        sin_t = np.sqrt(1.0 - cos_t ** 2)
        self.points = np.stack([(sin_t * np.cos(ph)).ravel(), (sin_t * np.sin(ph)).ravel(), cos_t.ravel()], axis=1)
        self.weights = np.repeat(weights / 2.0, n_phi) / n_phi
        self.shape = (n_theta, n_phi)

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> complex:
        return complex(self.weights @ values)


class SpherePolynomial:
    """c + a·x + x^T Q x with Q symmetric and traceless."""

    def __init__(self, constant: float, linear: np.ndarray, quadratic: np.ndarray):
        q = np.asarray(quadratic, dtype=float)
        self.constant = float(constant)
        self.linear = np.asarray(linear, dtype=float)
        self.quadratic = 0.5 * (q + q.T) - np.trace(q) / 3.0 * np.eye(3)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return self.constant + pts @ self.linear + np.einsum("gi,ij,gj->g", pts, self.quadratic, pts)

    def scaled(self, factor: float) -> "SpherePolynomial":
        return SpherePolynomial(factor * self.constant, factor * self.linear, factor * self.quadratic)

    @classmethod
    def random(cls, rng: np.random.Generator, quadratic: bool = True) -> "SpherePolynomial":
        q = rng.standard_normal((3, 3)) if quadratic else np.zeros((3, 3))
        return cls(0.0, rng.standard_normal(3), q)

    def describe(self) -> str:
        return f"linear={np.round(self.linear, 6).tolist()} quadratic={np.round(self.quadratic, 6).tolist()}"


class CovariantSymbolFunction:
    """x -> <psi_x, T psi_x>, evaluable anywhere on the sphere."""

    def __init__(self, matrix: np.ndarray, rep: SpinRep):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.rep = rep

    def __call__(self, points: np.ndarray) -> np.ndarray:
        psi = self.rep.coherent_vectors(points)
        return np.einsum("gi,ij,gj->g", psi.conj(), self.matrix, psi)


def covariant_symbol(matrix: np.ndarray, rep: SpinRep, grid: SphereGrid) -> np.ndarray:
    """sigma_T(x) = tr(T U_x P U_x*) on the grid points."""
    return CovariantSymbolFunction(matrix, rep)(grid.points)


def contravariant_symbol(values: np.ndarray, rep: SpinRep, grid: SphereGrid) -> np.ndarray:
    """(2j+1) sum_i w_i f(x_i) U_i P U_i* for grid values f(x_i)."""
    psi = rep.coherent_vectors(grid.points)
    weighted = (grid.weights * np.asarray(values))[:, None] * psi
    return rep.dim * np.einsum("gi,gj->ij", weighted, psi.conj())


def berezin_residual(matrix: np.ndarray, rep: SpinRep, grid: SphereGrid) -> float:
    """||contravariant(covariant(T)) - T||."""
    return operator_norm(contravariant_symbol(covariant_symbol(matrix, rep, grid), rep, grid) - matrix)


def rotation_samples(count: int, seed: int, small_angle: float = 0.1) -> List[Rotation]:
    """Seeded random rotations plus small rotations about the coordinate axes."""
    stack = Rotation.random(count, seed) if count else None
    rotations = [stack[i] for i in range(count)] if count else []
    for axis in np.eye(3):
        rotations.append(Rotation.from_rotvec(small_angle * axis))
    return rotations


class SphereFunctionLip:
    """
    L_A(f) = max over sampled rotations g of max_grid |f(g^{-1} x) - f(x)| / l(g)
    for functions on the sphere that can be evaluated at rotated points.
    """

    def __init__(self, grid: SphereGrid, rotations: Sequence[Rotation], lengths: Sequence[float]):
        if len(rotations) != len(lengths) or not rotations:
            raise InputError("need one positive length per sampled rotation")
        if any(not length > 0 for length in lengths):
            raise InputError("rotation lengths must be positive")
        self.grid = grid
        self.rotations = list(rotations)
        self.lengths = np.asarray(lengths, dtype=float)
        self._moved = [r.inv().apply(grid.points) for r in self.rotations]

    def value(self, f: SphereFunction) -> float:
        base = f(self.grid.points)
        return max(float(np.abs(f(moved) - base).max()) / length
                   for moved, length in zip(self._moved, self.lengths))


def sphere_lip_norms(rep: SpinRep, grid: SphereGrid, rotations: Sequence[Rotation],
                     length: Optional[Callable[[Rotation], float]] = None) -> Tuple[SphereFunctionLip, ActionLip]:
    """
    Lip-norms induced by the rotation action with length l (rotation angle by
    default): L_A on functions, L_B on M_{2j+1} by conjugation with U_g.

    Raises:
        InputError: if a sampled rotation has zero length
    """
    length = length or (lambda r: float(r.magnitude()))
    lengths = [length(r) for r in rotations]
    if any(not value > 0 for value in lengths):
        raise InputError("sampled rotation has zero length")
    system = OperatorSystem.full_matrix(rep.dim)
    actions = [(Automorphism(unitary=rep.rotation(r)), value) for r, value in zip(rotations, lengths)]
    return SphereFunctionLip(grid, rotations, lengths), ActionLip(system, actions, check=False)


def lip_one_functions(lip_a: SphereFunctionLip, count: int, seed: int) -> List[SpherePolynomial]:
    """Coordinate functions and random degree-2 polynomials scaled to L_A = 1."""
    rng = np.random.default_rng(seed)
    candidates = [SpherePolynomial(0.0, axis, np.zeros((3, 3))) for axis in np.eye(3)]
    candidates += [SpherePolynomial.random(rng) for _ in range(count)]
    return [f.scaled(1.0 / lip_a.value(f)) for f in candidates]


def lip_one_matrices(rep: SpinRep, lip_b: ActionLip, count: int, seed: int) -> List[np.ndarray]:
    """Generators and random traceless Hermitian matrices scaled to L_B = 1."""
    rng = np.random.default_rng(seed)
    candidates = [rep.jx, rep.jy, rep.jz]
    for _ in range(count):
        g = rng.standard_normal((rep.dim, rep.dim)) + 1j * rng.standard_normal((rep.dim, rep.dim))
        h = 0.5 * (g + g.conj().T)
        candidates.append(h - np.trace(h) / rep.dim * np.eye(rep.dim))
    out = []
    for t in candidates:
        value = lip_b.value(t)
        if value > 0:
            out.append(t / value)
    return out


def bridge_gamma_estimate(rep: SpinRep, grid: SphereGrid, lip_a: SphereFunctionLip, lip_b: ActionLip,
                          samples: int = 8, seed: int = 0, delta: float = 0.05) -> MetricEstimate:
    """
    Heuristic constant gamma for the bridge N(f, T) = ||f - sigma_T||_inf / gamma.

    For each Lip-1 function f the candidate partner is T = contravariant(f),
    shrunk if needed so that L_B(T) <= 1 + delta; gamma is the largest gap
    ||f - sigma_T||_inf. Partners of Lip-1 matrices T are f = sigma_T. Rotation
    equivariance of the symbol gives L_A(sigma_T) <= L_B(T); it is measured on
    the matrix net, and where sigma_T exceeds L_A = 1 it is shrunk to the unit
    ball and gamma widened by the resulting gap. The distance bound gamma +
    max residual over the matrix net is recorded in params.
    """
    seeds = derive_seeds(seed, 2)
    gamma = 0.0
    witnesses: List[Witness] = []
    for f in lip_one_functions(lip_a, samples, seeds[0]):
        values = f(grid.points)
        t = contravariant_symbol(values, rep, grid)
        t = 0.5 * (t + t.conj().T)
        lb = lip_b.value(t)
        if lb > 1.0 + delta:
            t = t * (1.0 + delta) / lb
        gap = float(np.abs(values - covariant_symbol(t, rep, grid)).max())
        if gap > gamma:
            gamma, witnesses = gap, [Witness(label="function", value=gap, note=f.describe())]

    matrices = lip_one_matrices(rep, lip_b, samples, seeds[1])
    residuals, symbol_excess = [], 0.0
    for t in matrices:
        residuals.append(berezin_residual(t, rep, grid))
        symbol = CovariantSymbolFunction(t, rep)
        excess = lip_a.value(symbol) - 1.0
        symbol_excess = max(symbol_excess, excess)
        if excess > SYMBOL_LIP_TOL:
            gap = float(np.abs(symbol(grid.points)).max()) * excess / (1.0 + excess)
            logger.warning(f"j={rep.j}: symbol of a Lip-1 matrix has L_A = {1.0 + excess:.6f}")
            if gap > gamma:
                gamma, witnesses = gap, [Witness(label="matrix", value=gap, matrices=[CMatrix.from_array(t)])]
    max_residual = max(residuals)
    return MetricEstimate(value=gamma, kind=EstimateKind.HEURISTIC, seed=seed, witnesses=witnesses,
                          params={"j": rep.j, "samples": samples, "delta": delta,
                                  "max_residual": max_residual, "symbol_lip_excess": symbol_excess,
                                  "distance_upper": gamma + max_residual})


def random_point_ucp(grid: SphereGrid, n: int, points: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    A u.c.p. map on grid functions f -> sum_g f(x_g) A_g with A_g >= 0 summing
    to 1_n. Returns (grid indices, effects of shape (points, n, n)).
    """
    indices = rng.choice(len(grid), size=points, replace=False)
    g = rng.standard_normal((points, n, n)) + 1j * rng.standard_normal((points, n, n))
    b = np.einsum("pij,pkj->pik", g, g.conj())
    inv = inverse_sqrt_psd(b.sum(axis=0))
    return indices, np.einsum("ij,pjk,kl->pil", inv, b, inv)


def matrix_level_bound_check(rep: SpinRep, grid: SphereGrid, lip_a: SphereFunctionLip, lip_b: ActionLip,
                             levels: Sequence[int] = (1, 2), maps: int = 6, samples: int = 6,
                             seed: int = 0, tol: float = 1e-9) -> CheckReport:
    """
    ||phi(f) - phi(sigma_T)|| <= ||f - sigma_T||_inf for sampled u.c.p. maps phi
    on functions and pairs (f, T = contravariant(f)).
    """
    rng = np.random.default_rng(seed)
    pairs = []
    for f in lip_one_functions(lip_a, samples, seed):
        values = f(grid.points)
        t = contravariant_symbol(values, rep, grid)
        pairs.append((values, covariant_symbol(0.5 * (t + t.conj().T), rep, grid)))
    worst = -np.inf
    for n in levels:
        for _ in range(maps):
            indices, effects = random_point_ucp(grid, n, min(8, len(grid)), rng)
            for values, symbol in pairs:
                lhs = operator_norm(np.einsum("p,pij->ij", values[indices] - symbol[indices], effects))
                worst = max(worst, lhs - float(np.abs(values - symbol).max()))
    details = {"levels": list(levels), "maps": maps, "pairs": len(pairs), "max_excess": float(worst)}
    if worst <= tol:
        return CheckReport.pass_report("matrix_level_bound", details=details)
    return CheckReport.fail_report("matrix_level_bound", f"exceeded by {worst:.3e}", details)


def symbol_property_report(rep: SpinRep, grid: SphereGrid, samples: int = 8, seed: int = 0) -> CheckReport:
    """Unitality and positivity of both symbol maps on random inputs."""
    rng = np.random.default_rng(seed)
    reports = []
    unit_cov = float(np.abs(covariant_symbol(np.eye(rep.dim), rep, grid) - 1.0).max())
    unit_contra = operator_norm(contravariant_symbol(np.ones(len(grid)), rep, grid) - np.eye(rep.dim))
    reports.append(CheckReport.pass_report("unital", details={"covariant": unit_cov, "contravariant": unit_contra})
                   if unit_cov <= 1e-9 and unit_contra <= 1e-6
                   else CheckReport.fail_report("unital", f"defects {unit_cov:.2e}, {unit_contra:.2e}"))
    worst_cov, worst_contra = np.inf, np.inf
    for _ in range(samples):
        g = rng.standard_normal((rep.dim, rep.dim)) + 1j * rng.standard_normal((rep.dim, rep.dim))
        worst_cov = min(worst_cov, float(covariant_symbol(g @ g.conj().T, rep, grid).real.min()))
        f = np.abs(SpherePolynomial.random(rng)(grid.points))
        worst_contra = min(worst_contra, min_eigenvalue(contravariant_symbol(f, rep, grid)))
    reports.append(CheckReport.pass_report("positive", details={"covariant_min": worst_cov,
                                                                "contravariant_min": worst_contra})
                   if worst_cov >= -1e-10 and worst_contra >= -1e-10
                   else CheckReport.fail_report("positive", f"minima {worst_cov:.2e}, {worst_contra:.2e}"))
    return CheckReport.combine(f"symbols[j={rep.j}]", reports)


def berezin_row(j: float, grid: SphereGrid, rotations: int = 12, samples: int = 6, seed: int = 0) -> Dict[str, float]:
    """One row of the j sweep: j, dim, gamma_hat, max_residual, upper_bound."""
    rep = SpinRep(j)
    lip_a, lip_b = sphere_lip_norms(rep, grid, rotation_samples(rotations, seed))
    estimate = bridge_gamma_estimate(rep, grid, lip_a, lip_b, samples=samples, seed=seed)
    logger.info(f"j={rep.j}: gamma_hat={estimate.value:.4f} residual={estimate.params['max_residual']:.4f}")
    return {"j": rep.j, "dim": rep.dim, "gamma_hat": estimate.value,
            "max_residual": estimate.params["max_residual"], "upper_bound": estimate.params["distance_upper"]}
