"""
cqms - Noncommutative Tori

Rational noncommutative tori realized by clock-shift (Weyl) unitaries, the
gauge action of T^d, Fourier polynomials, Cesàro means with the Fejér kernel,
and finite-rank approximation certificates for the torus Lip-norms.

Conventions: u_j u_i = rho_ij u_i u_j with rho_ij = exp(2 pi i p_ij / q);
the Fejér kernel is K_n(t) = sum_{|k|<=n} (1 - |k|/(n+1)) e^{2 pi i k t}
= (1/(n+1)) (sin((n+1) pi t) / sin(pi t))^2.
"""

import itertools
import math
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from cqms_lipnorms import ActionLip, Automorphism, QuotientLip
from cqms_logger import get_logger
from cqms_matrix import as_matrix, operator_norm
from cqms_metrics import derive_seeds, diameter_upper_bound
from cqms_opsys import OperatorSystem, UcpMap, trace_state
from cqms_types import CheckReport, FejerBound, InputError, NumericalFailure, SeminormValue

RELATION_TOL = 1e-10
MAX_DENOMINATOR = 64
FEJER_POINTS = 4096

logger = get_logger("nctorus")

Index = Tuple[int, ...]


def _weyl(q: int, a: Sequence[int], b: Sequence[int]) -> np.ndarray:
    """Tensor product over factors of Z^a X^b on C^q, with Z X = omega X Z."""
    omega = np.exp(2j * np.pi / q)
    clock = omega ** np.arange(q)
    out = np.ones((1, 1), dtype=complex)
    for ai, bi in zip(a, b):
        factor = np.roll(np.eye(q, dtype=complex), int(bi) % q, axis=0)
        out = np.kron(out, clock[:, None] ** (int(ai) % q) * factor)
    return out


class TorusSpec:
    """
    Clock-shift model of the rational noncommutative torus with phases
    exp(2 pi i p_ij / q).

    The "minimal" model lives on (C^q)^{⊗(d-1)} and is used when
    gcd(p_1d, ..., p_{d-1,d}, q) = 1; the "full" model on (C^q)^{⊗d} always
    exists. In both, the normalized trace vanishes on every monomial u^k with
    all |k_i| < q other than k = 0.
    """

    def __init__(self, d: int, q: int, p: Union[int, Sequence[Sequence[int]], np.ndarray] = 0,
                 model: str = "auto"):
        if d < 1 or q < 1:
            raise InputError(f"need d >= 1 and q >= 1, got d={d}, q={q}")
        if np.isscalar(p):
            if d != 2 and p != 0:
                raise InputError("a scalar phase numerator needs d = 2")
            matrix = np.zeros((d, d), dtype=int)
            if d == 2:
                matrix[0, 1], matrix[1, 0] = int(p), -int(p)
        else:
            matrix = np.asarray(p)
            if matrix.shape != (d, d):
                raise InputError(f"phase matrix must be {d}x{d}, got {matrix.shape}")
            if not np.all(matrix == np.round(matrix)):
                raise InputError("phase numerators must be integers")
            matrix = matrix.astype(int)
            if np.any((matrix + matrix.T) % q):
                raise InputError("phase matrix must be antisymmetric modulo q")
        self.d = d
        self.q = q
        self.p = np.mod(matrix, q)
        self.omega = np.exp(2j * np.pi / q)

        minimal_ok = d >= 2 and math.gcd(*(int(v) for v in self.p[:d - 1, d - 1]), q) == 1
        if model == "auto":
            model = "minimal" if minimal_ok else "full"
        if model == "minimal" and not minimal_ok:
            raise InputError("the minimal model needs d >= 2 and gcd(p_1d, ..., p_{d-1,d}, q) = 1")
        if model not in ("minimal", "full"):
            raise InputError(f"unknown model {model!r}")
        self.model = model
        self.labels = self._labels()
        self.factors = len(self.labels[0][0])
        self.size = q ** self.factors
        self.generators = [_weyl(q, a, b) for a, b in self.labels]
        self._monomials: Dict[Index, np.ndarray] = {}
        self._gauge: Dict[Index, np.ndarray] = {}

    def _labels(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        d, p = self.d, self.p
        m = d - 1 if self.model == "minimal" else d
        labels = []
        for i in range(d):
            a = np.zeros(m, dtype=int)
            b = np.zeros(m, dtype=int)
            if i < m:
                a[i] = 1
                for j in range(i + 1, m):
                    b[j] = p[i, j]
            else:
                for j in range(d - 1):
                    b[j] = -p[j, d - 1]
            labels.append((a, b))
        return labels

    @classmethod
    def from_phases(cls, theta: Union[float, Sequence[Sequence[float]]],
                    max_denominator: int = MAX_DENOMINATOR) -> "TorusSpec":
        """
        Model for phases exp(2 pi i theta_ij) with rational theta.

        Raises:
            InputError: if some theta_ij is not rational with a small denominator
        """
        arr = np.atleast_2d(np.asarray(theta, dtype=float))
        if arr.shape == (1, 1):
            arr = np.array([[0.0, arr[0, 0]], [-arr[0, 0], 0.0]])
        d = arr.shape[0]
        fractions = {}
        for (i, j), value in np.ndenumerate(arr):
            frac = Fraction(value).limit_denominator(max_denominator)
            if abs(float(frac) - value) > 1e-12:
                raise InputError(
                    f"phase theta[{i},{j}] = {value} is not rational with denominator <= {max_denominator}; "
                    f"rationalize it first, e.g. Fraction(theta).limit_denominator(q)")
            fractions[(i, j)] = frac
        q = math.lcm(*(f.denominator for f in fractions.values()))
        p = np.zeros((d, d), dtype=int)
        for (i, j), frac in fractions.items():
            p[i, j] = frac.numerator * (q // frac.denominator)
        return cls(d, q, p)

    def rho(self, i: int, j: int) -> complex:
        return complex(self.omega ** self.p[i, j])

    def relation_defects(self) -> Dict[str, float]:
        u = self.generators
        unitary = max(operator_norm(g @ g.conj().T - np.eye(self.size)) for g in u)
        relation = 0.0
        for i in range(self.d):
            for j in range(i + 1, self.d):
                relation = max(relation, operator_norm(u[j] @ u[i] - self.rho(i, j) * u[i] @ u[j]))
        return {"unitary": unitary, "relations": relation}

    def monomial(self, k: Sequence[int]) -> np.ndarray:
        """u_1^{k_1} ... u_d^{k_d}."""
        key = tuple(int(v) for v in k)
        if len(key) != self.d:
            raise InputError(f"monomial index must have {self.d} entries")
        if key not in self._monomials:
            out = np.eye(self.size, dtype=complex)
            for g, power in zip(self.generators, key):
                base = g if power >= 0 else g.conj().T
                out = out @ np.linalg.matrix_power(base, abs(power))
            self._monomials[key] = out
        return self._monomials[key]

    def residues(self) -> Iterable[Index]:
        """Centered representatives of Z_q^d, zero first."""
        half = self.q // 2
        reps = [0] + [r for r in range(-half, self.q - half) if r != 0]
        return itertools.product(reps, repeat=self.d)

    @cached_property
    def system(self) -> OperatorSystem:
        """The C*-algebra generated by the u_i, as an operator system."""
        name = f"torus(d={self.d},q={self.q})"
        if self.q ** self.d == self.size ** 2:
            full = OperatorSystem.full_matrix(self.size)
            full.name = name
            return full
        return OperatorSystem([self.monomial(k) for k in self.residues()], name=name)

    @cached_property
    def center_dim(self) -> int:
        """Number of monomial classes commuting with every generator."""
        return sum(1 for k in itertools.product(range(self.q), repeat=self.d)
                   if not np.any(np.asarray(k) @ self.p % self.q))

    @property
    def block_sizes(self) -> List[int]:
        blocks = self.center_dim
        size = round(math.sqrt(self.q ** self.d / blocks))
        return [size] * blocks

    @property
    def rank(self) -> int:
        """C*-algebra rank of the generated algebra: sum of its block sizes."""
        return sum(self.block_sizes)

    def gauge_unitary(self, s: Sequence[int]) -> np.ndarray:
        """
        Weyl unitary V with V u_j V* = omega^{s_j} u_j, implementing the
        gauge action at the lattice point s/q.
        """
        key = tuple(int(v) % self.q for v in s)
        if len(key) != self.d:
            raise InputError(f"lattice point must have {self.d} entries")
        if key in self._gauge:
            return self._gauge[key]
        target = np.asarray(key)
        for alpha in itertools.product(range(self.q), repeat=self.factors):
            alpha = np.asarray(alpha, dtype=int)
            beta = np.zeros(self.factors, dtype=int)
            for j, (a, b) in enumerate(self.labels):
                if a.any():
                    beta[int(np.argmax(a))] = int(alpha @ b) - target[j]
            phases = np.array([(b @ alpha - beta @ a) for a, b in self.labels]) - target
            if not np.any(phases % self.q):
                self._gauge[key] = _weyl(self.q, alpha, beta)
                return self._gauge[key]
        raise InputError(f"lattice point {key} has no inner implementation on the {self.model} model")

    def __repr__(self) -> str:
        return f"TorusSpec(d={self.d}, q={self.q}, model={self.model!r}, size={self.size})"


def clock_shift_algebra(d: int, q: int, p: Union[int, Sequence[Sequence[int]], np.ndarray] = 0,
                        model: str = "auto") -> TorusSpec:
    """
    Clock-shift model with u_j u_i = exp(2 pi i p_ij / q) u_i u_j.

    Raises:
        InputError: if the relations fail to hold within 1e-10
    """
    spec = TorusSpec(d, q, p, model=model)
    defects = spec.relation_defects()
    if max(defects.values()) > RELATION_TOL:
        raise InputError(f"clock-shift relations fail: {defects}")
    logger.debug(f"built {spec} with defects {defects}")
    return spec


class FourierPolynomial:
    """Finite sum of c_k u^k, with u^k = u_1^{k_1} ... u_d^{k_d}."""

    def __init__(self, d: int, coefficients: Mapping[Sequence[int], complex]):
        self.d = d
        coeffs: Dict[Index, complex] = {}
        for k, c in coefficients.items():
            key = tuple(int(v) for v in k)
            if len(key) != d:
                raise InputError(f"index {key} does not have {d} entries")
            if c != 0:
                coeffs[key] = coeffs.get(key, 0) + complex(c)
        self.coefficients = coeffs

    @classmethod
    def monomial(cls, d: int, k: Sequence[int], c: complex = 1.0) -> "FourierPolynomial":
        return cls(d, {tuple(k): c})

    @classmethod
    def one(cls, d: int) -> "FourierPolynomial":
        return cls(d, {(0,) * d: 1.0})

    @classmethod
    def generator(cls, d: int, i: int) -> "FourierPolynomial":
        k = [0] * d
        k[i] = 1
        return cls.monomial(d, k)

    @classmethod
    def random(cls, d: int, degree: int, rng: np.random.Generator, terms: int = 6) -> "FourierPolynomial":
        """Random coefficients on random indices with |k_i| <= degree, zero index excluded."""
        coeffs = {}
        for _ in range(terms):
            k = tuple(int(v) for v in rng.integers(-degree, degree + 1, size=d))
            if any(k):
                coeffs[k] = complex(rng.standard_normal(), rng.standard_normal())
        return cls(d, coeffs)

    @property
    def degree(self) -> int:
        return max((max(abs(v) for v in k) for k in self.coefficients), default=0)

    def coefficient(self, k: Sequence[int]) -> complex:
        return self.coefficients.get(tuple(int(v) for v in k), 0j)

    def _map(self, factor: Callable[[Index], complex]) -> "FourierPolynomial":
        return FourierPolynomial(self.d, {k: c * factor(k) for k, c in self.coefficients.items()})

    def __add__(self, other: "FourierPolynomial") -> "FourierPolynomial":
        out = dict(self.coefficients)
        for k, c in other.coefficients.items():
            out[k] = out.get(k, 0) + c
        return FourierPolynomial(self.d, out)

    def __sub__(self, other: "FourierPolynomial") -> "FourierPolynomial":
        return self + other * -1.0

    def __mul__(self, scalar: complex) -> "FourierPolynomial":
        return self._map(lambda _: scalar)

    __rmul__ = __mul__

    def gauge(self, t: Sequence[float]) -> "FourierPolynomial":
        t = np.asarray(t, dtype=float)
        return self._map(lambda k: np.exp(2j * np.pi * float(np.dot(k, t))))

    def derivation(self, i: int) -> "FourierPolynomial":
        """Generator of the gauge action along the i-th axis: c_k -> 2 pi i k_i c_k."""
        return self._map(lambda k: 2j * np.pi * k[i])

    def fejer_multiplier(self, n: int) -> "FourierPolynomial":
        return self._map(lambda k: float(np.prod([max(0.0, 1.0 - abs(v) / (n + 1)) for v in k])))

    def partial_sum(self, degrees: Sequence[int]) -> "FourierPolynomial":
        """Terms with |k_j| <= degrees[j]."""
        return FourierPolynomial(self.d, {k: c for k, c in self.coefficients.items()
                                          if all(abs(v) <= n for v, n in zip(k, degrees))})

    def to_matrix(self, spec: TorusSpec) -> np.ndarray:
        """
        Raises:
            InputError: if some |k_i| >= q, where the model no longer separates monomials
        """
        if spec.d != self.d:
            raise InputError(f"polynomial in {self.d} variables, model in {spec.d}")
        if self.degree >= spec.q:
            raise InputError(f"degree {self.degree} aliases on the q={spec.q} model")
        out = np.zeros((spec.size, spec.size), dtype=complex)
        for k, c in self.coefficients.items():
            out += c * spec.monomial(k)
        return out

    @classmethod
    def from_matrix(cls, spec: TorusSpec, a: object, degree: int) -> "FourierPolynomial":
        """
        Coefficients of a on the box |k_i| <= degree.

        Raises:
            InputError: if 2*degree >= q, where box monomials are no longer trace-orthogonal
        """
        if 2 * degree >= spec.q:
            raise InputError(f"degree {degree} is too large to read coefficients on the q={spec.q} model")
        a = as_matrix(a)
        coeffs = {k: fourier_coeff(a, k, spec)
                  for k in itertools.product(range(-degree, degree + 1), repeat=spec.d)}
        return cls(spec.d, {k: c for k, c in coeffs.items() if abs(c) > 1e-14})

    def __repr__(self) -> str:
        return f"FourierPolynomial(d={self.d}, terms={len(self.coefficients)}, degree={self.degree})"


def fourier_coeff(a: Union[FourierPolynomial, np.ndarray], k: Sequence[int],
                  spec: Optional[TorusSpec] = None) -> complex:
    """
    Coefficient of u^k: read off directly for polynomials, and as
    tau(a (u^k)*) with the normalized trace for matrices of the model.

    Raises:
        InputError: if some |k_i| >= q when reading from a matrix
    """
    if isinstance(a, FourierPolynomial):
        return a.coefficient(k)
    if spec is None:
        raise InputError("reading coefficients from a matrix needs the torus model")
    if any(abs(int(v)) >= spec.q for v in k):
        raise InputError(f"index {tuple(k)} aliases on the q={spec.q} model")
    m = as_matrix(a)
    return complex(np.trace(m @ spec.monomial(k).conj().T) / spec.size)


def _lattice_weights(q: int, d: int, n: int) -> Tuple[List[Index], np.ndarray]:
    if n >= q:
        raise InputError(f"Cesàro degree {n} must be below q={q} on the matrix model")
    points = list(itertools.product(range(q), repeat=d))
    one_d = fejer_kernel(n, np.arange(q) / q) / q
    weights = np.array([np.prod(one_d[list(s)]) for s in points])
    return points, weights


def torus_action(spec: TorusSpec, t: Sequence[float],
                 a: Union[FourierPolynomial, np.ndarray]) -> Union[FourierPolynomial, np.ndarray]:
    """
    Gauge automorphism gamma_t: u_j -> exp(2 pi i t_j) u_j.

    Polynomials transform coefficientwise for every t. Matrices transform by
    conjugation when t lies on the lattice (1/q)Z^d, and through their Fourier
    expansion otherwise.

    Raises:
        InputError: if a matrix is not a Fourier polynomial of degree below q/2
    """
    t = np.asarray(t, dtype=float)
    if t.shape != (spec.d,):
        raise InputError(f"torus point must have {spec.d} entries")
    if isinstance(a, FourierPolynomial):
        return a.gauge(t)
    m = as_matrix(a)
    scaled = t * spec.q
    if np.allclose(scaled, np.round(scaled), atol=1e-9):
        v = spec.gauge_unitary(np.round(scaled).astype(int))
        return v @ m @ v.conj().T
    poly = FourierPolynomial.from_matrix(spec, m, (spec.q - 1) // 2)
    if operator_norm(poly.to_matrix(spec) - m) > 1e-9 * (1.0 + operator_norm(m)):
        raise InputError("element is not a Fourier polynomial of degree below q/2")
    return poly.gauge(t).to_matrix(spec)


def fejer_kernel(n: int, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Closed form (1/(n+1)) (sin((n+1) pi t) / sin(pi t))^2, with K_n(0) = n + 1."""
    t = np.asarray(t, dtype=float)
    s = np.sin(np.pi * t)
    safe = np.where(np.abs(s) < 1e-12, 1.0, s)
    value = np.where(np.abs(s) < 1e-12, float(n + 1), np.sin((n + 1) * np.pi * t) ** 2 / ((n + 1) * safe ** 2))
    return float(value) if value.ndim == 0 else value


def fejer_kernel_series(n: int, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """sum_{|k|<=n} (1 - |k|/(n+1)) exp(2 pi i k t), real part."""
    t = np.asarray(t, dtype=float)
    ks = np.arange(-n, n + 1)
    weights = 1.0 - np.abs(ks) / (n + 1)
    value = np.tensordot(np.cos(2 * np.pi * np.multiply.outer(t, ks)), weights, axes=([-1], [0]))
    return float(value) if np.ndim(value) == 0 else value


def cesaro_mean(a: Union[FourierPolynomial, np.ndarray], n: int,
                spec: Optional[TorusSpec] = None) -> Union[FourierPolynomial, np.ndarray]:
    """
    sigma_n(a): the Fejér multiplier prod_j (1 - |k_j|/(n+1))_+ on polynomials;
    on model matrices, the lattice average sum_s w_s V_s a V_s* with
    w_s = prod_j K_n(s_j/q) / q^d, which agrees with the multiplier when 2n < q.

    Raises:
        InputError: if n >= q for a matrix input
    """
    if n < 0:
        raise InputError("Cesàro degree must be nonnegative")
    if isinstance(a, FourierPolynomial):
        return a.fejer_multiplier(n)
    if spec is None:
        raise InputError("averaging a matrix needs the torus model")
    m = as_matrix(a)
    points, weights = _lattice_weights(spec.q, spec.d, n)
    out = np.zeros_like(m)
    for s, w in zip(points, weights):
        if w > 0:
            v = spec.gauge_unitary(s)
            out += w * (v @ m @ v.conj().T)
    return out


def cesaro_by_partial_sums(a: FourierPolynomial, n: int) -> FourierPolynomial:
    """(n+1)^{-d} sum over 0 <= n_j <= n of the partial sums s_{(n_1..n_d)}(a)."""
    total = FourierPolynomial(a.d, {})
    for degrees in itertools.product(range(n + 1), repeat=a.d):
        total = total + a.partial_sum(degrees)
    return total * (1.0 / (n + 1) ** a.d)


class LengthFn:
    """
    Length function on T^d = (R/Z)^d, evaluated on points given by any real
    representatives.
    """

    def __init__(self, name: str, d: int, fn: Callable[[np.ndarray], np.ndarray]):
        self.name = name
        self.d = d
        self._fn = fn

    def __call__(self, t: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(t, dtype=float))
        if pts.shape[1] != self.d:
            raise InputError(f"length function on T^{self.d} got points of width {pts.shape[1]}")
        return self._fn(self.centered(pts))

    @staticmethod
    def centered(t: np.ndarray) -> np.ndarray:
        """Representatives in [-1/2, 1/2)."""
        return t - np.floor(t + 0.5)

    @classmethod
    def euclidean(cls, d: int) -> "LengthFn":
        return cls("euclidean", d, lambda t: np.linalg.norm(t, axis=1))

    @classmethod
    def sup_norm(cls, d: int) -> "LengthFn":
        return cls("sup", d, lambda t: np.abs(t).max(axis=1))

    @classmethod
    def by_name(cls, name: str, d: int) -> "LengthFn":
        if name == "euclidean":
            return cls.euclidean(d)
        if name == "sup":
            return cls.sup_norm(d)
        raise InputError(f"unknown length function {name!r}")

    def check_axioms(self, samples: int = 256, seed: int = 0, tol: float = 1e-9) -> CheckReport:
        """l(0) = 0, l > 0 away from 0, symmetry and subadditivity on sampled points."""
        rng = np.random.default_rng(seed)
        s = rng.random((samples, self.d))
        t = rng.random((samples, self.d))
        zero = float(self(np.zeros(self.d))[0])
        positive = float(self(s).min())
        symmetry = float(np.abs(self(s) - self(-s)).max())
        subadditive = float((self(s + t) - self(s) - self(t)).max())
        details = {"zero": zero, "min_positive": positive, "symmetry": symmetry, "subadditivity_excess": subadditive}
        failures = [name for name, bad in [("zero", abs(zero) > tol), ("positivity", positive <= 0),
                                           ("symmetry", symmetry > tol), ("subadditivity", subadditive > tol)] if bad]
        if failures:
            return CheckReport.fail_report(f"length[{self.name}]", f"failed: {', '.join(failures)}", details)
        return CheckReport.pass_report(f"length[{self.name}]", details=details)


def fejer_bound(n: int, ell: Callable[[np.ndarray], np.ndarray], d: Optional[int] = None,
                points: int = FEJER_POINTS) -> FejerBound:
    """
    sum_k int_T l(r_k(t)) K_n(t) dt with r_k(t) = t e_k, by the periodic
    trapezoid rule; the error estimate is the gap to the half-resolution rule.
    """
    d = d if d is not None else getattr(ell, "d", 1)
    if points < 2:
        raise InputError("quadrature needs at least two points")

    def rule(count: int) -> float:
        t = np.arange(count) / count
        kernel = fejer_kernel(n, t)
        total = 0.0
        for k in range(d):
            pts = np.zeros((count, d))
            pts[:, k] = t
            total += float(np.mean(np.asarray(ell(pts)) * kernel))
        return total

    value = rule(points)
    return FejerBound(value=max(value, 0.0), error_estimate=abs(value - rule(points // 2)), points=points)


def lattice_fejer_bound(q: int, d: int, n: int, ell: Callable[[np.ndarray], np.ndarray]) -> float:
    """
    sum_s w_s l(s/q) over s in Z_q^d with w_s = prod_j K_n(s_j/q) / q^d.
    Bounds ||x - sigma_n(x)|| for L(x) <= 1 under the lattice action Lip-norm,
    whatever the phases.
    """
    points, weights = _lattice_weights(q, d, n)
    lengths = np.asarray(ell(np.asarray(points, dtype=float) / q))
    return float(weights @ lengths)


def lattice_multiplier(spec: TorusSpec, n: int, k: Sequence[int]) -> float:
    """Eigenvalue of the lattice Cesàro mean on the monomial u^k."""
    one_d = fejer_kernel(n, np.arange(spec.q) / spec.q) / spec.q
    phases = np.exp(2j * np.pi * np.outer(np.asarray(k), np.arange(spec.q)) / spec.q)
    return float(np.prod((phases @ one_d).real))


class TorusActionLip(ActionLip):
    """
    ActionLip of the gauge action restricted to the lattice (1/q)Z^d, with
    lengths l(s/q); remembers the model and the length function.
    """

    def __init__(self, spec: TorusSpec, ell: LengthFn):
        if ell.d != spec.d:
            raise InputError(f"length function on T^{ell.d} for a d={spec.d} torus")
        system = spec.system
        actions = []
        for s in spec.residues():
            if any(s):
                length = float(ell(np.asarray(s, dtype=float) / spec.q)[0])
                actions.append((Automorphism(unitary=spec.gauge_unitary(s)), length))
        if not actions:
            raise InputError("the q=1 torus has no nontrivial lattice points")
        super().__init__(system, actions, check=not system.is_full_algebra())
        self.spec = spec
        self.ell = ell

    def fejer_defect(self, n: int) -> float:
        return lattice_fejer_bound(self.spec.q, self.spec.d, n, self.ell)

    def mean_length(self) -> float:
        return float(self.lengths.sum() / (len(self.actions) + 1))


def torus_lipnorm(spec: TorusSpec, ell: Optional[LengthFn] = None) -> TorusActionLip:
    return TorusActionLip(spec, ell or LengthFn.euclidean(spec.d))


def polynomial_norm(spec: TorusSpec, a: FourierPolynomial, grid: int = 8) -> SeminormValue:
    """
    sup_z ||pi(gamma_z(a))|| over the gauge-twisted model representations.

    Twists by lattice points are inner, so z ranges over one cell of side 1/q;
    the reported upper end adds the Lipschitz constant of z -> pi(gamma_z(a))
    times the grid half-spacing.
    """
    keys = list(a.coefficients)
    if not keys:
        return SeminormValue.exact(0.0)
    if a.degree >= spec.q:
        raise InputError(f"degree {a.degree} aliases on the q={spec.q} model")
    coeffs = np.array([a.coefficients[k] for k in keys])
    ks = np.asarray(keys, dtype=float)
    mats = np.stack([spec.monomial(k) for k in keys])
    h = 1.0 / (grid * spec.q)
    axis = (np.arange(grid) + 0.5) * h
    zs = np.array(list(itertools.product(axis, repeat=spec.d)))
    phases = np.exp(2j * np.pi * zs @ ks.T) * coeffs[None, :]
    twisted = np.einsum("zk,kij->zij", phases, mats)
    lower = float(np.linalg.norm(twisted, ord=2, axis=(1, 2)).max())
    correction = float(np.pi * h * np.sum(np.abs(coeffs) * np.abs(ks).sum(axis=1)))
    return SeminormValue.bracketed(lower, lower + correction)


def generator_lip(spec: TorusSpec, a: FourierPolynomial, grid: int = 8) -> SeminormValue:
    """max_k ||delta_k(a)||: the Lip-norm of the coordinate-axis gauge flows with l(t e_k) = |t|."""
    values = [polynomial_norm(spec, a.derivation(i), grid) for i in range(a.d)]
    return SeminormValue.bracketed(max(v.lower for v in values), max(v.upper for v in values))


def fejer_inequality_check(spec: TorusSpec, degrees: Sequence[int], ell: Optional[LengthFn] = None,
                           samples: int = 100, poly_degree: int = 3, seed: int = 0,
                           slack: float = 1e-6, grid: int = 8) -> CheckReport:
    """
    ||a - sigma_n(a)|| <= sum_k int l(r_k(t)) K_n(t) dt for random polynomials
    scaled by the certified upper end of the generator Lip-norm. Left sides
    use certified lower ends, so every reported violation is genuine.
    """
    ell = ell or LengthFn.euclidean(spec.d)
    rng = np.random.default_rng(seed)
    bounds = {n: fejer_bound(n, ell, spec.d).value for n in degrees}
    worst, count = -np.inf, 0
    for _ in range(samples):
        a = FourierPolynomial.random(spec.d, min(poly_degree, spec.q - 1), rng)
        lip = generator_lip(spec, a, grid).upper
        if lip <= 0:
            continue
        a = a * (1.0 / lip)
        count += 1
        for n in degrees:
            lhs = polynomial_norm(spec, a - cesaro_mean(a, n), grid).lower
            worst = max(worst, lhs - bounds[n])
    details = {"samples": count, "degrees": list(degrees), "bounds": bounds, "max_excess": float(worst)}
    if worst <= slack:
        return CheckReport.pass_report("fejer_inequality", details=details)
    return CheckReport.fail_report("fejer_inequality", f"exceeded by {worst:.3e}", details)


class RcpCertificate(BaseModel):
    """
    A completely positive factorization x -> beta(alpha(x)) through a
    finite-dimensional C*-algebra B, with its approximation defect.
    """
    eps: float = Field(..., gt=0.0)
    success: bool
    n: int = Field(..., ge=0, description="Cesàro degree of the compression alpha")
    rank: int = Field(..., ge=1, description="C*-algebra rank of B")
    block_sizes: List[int] = Field(..., description="Matrix block sizes of B")
    range_dim: int = Field(default=1, ge=1, description="Dimension of the operator system alpha(X)")
    defect: float = Field(..., ge=0.0, description="Certified sup of ||beta(alpha(x)) - x|| over the Lip ball")
    sampled_defect: float = Field(default=0.0, ge=0.0)
    recheck_defect: float = Field(default=0.0, ge=0.0)
    alpha: str
    beta: str

    model_config = ConfigDict(frozen=True)


def _compress(lip: TorusActionLip, n: int, x: np.ndarray) -> np.ndarray:
    if n == 0:
        return np.trace(x) / x.shape[0] * np.eye(x.shape[0])
    return cesaro_mean(x, n, lip.spec)


def _sampled_defect(lip: TorusActionLip, n: int, net_size: int, seed: int) -> float:
    """max ||x - alpha(x)|| over random Lip-1 elements and support points."""
    system = lip.system
    rng = np.random.default_rng(seed)
    worst = 0.0
    points = []
    for _ in range(net_size):
        c = lip.ball.normalized(rng.standard_normal(system.hermitian_dim))
        if c is not None:
            points.append(c)
    for _ in range(max(1, net_size // 4)):
        try:
            points.append(lip.ball.support(rng.standard_normal(system.hermitian_dim))[2])
        except NumericalFailure as exc:
            logger.warning(f"support point skipped: {exc}")
    for c in points:
        x = system.from_herm_coords(c)
        worst = max(worst, operator_norm(x - _compress(lip, n, x)))
    return worst


def _defect(lip: TorusActionLip, n: int) -> float:
    if n == 0:
        upper = diameter_upper_bound(lip)
        mean = lip.mean_length()
        return mean if upper is None else min(mean, upper)
    return lip.fejer_defect(n)


def rcp_upper(lip: TorusActionLip, eps: float, net_size: int = 8, seed: int = 0,
              verify: bool = True) -> RcpCertificate:
    """
    Upper bound for the completely positive approximation rank at eps.

    alpha is the lattice Cesàro mean sigma_n (n = 0 is the trace state, with
    B = C and beta the unitization); for n >= 1, B is the C*-algebra
    generated by the model and beta the inclusion. n is the least degree with
    certified defect below eps; the defect is then re-sampled on two
    independent Lip-ball nets. If no n < q reaches eps the certificate
    reports failure with the smallest defect found.
    """
    if not eps > 0:
        raise InputError("eps must be positive")
    spec = lip.spec
    defects = [_defect(lip, n) for n in range(spec.q)]
    chosen = next((n for n, value in enumerate(defects) if value < eps), None)
    success = chosen is not None
    if not success:
        chosen = int(np.argmin(defects))
        logger.warning(f"no Cesàro degree below q={spec.q} reaches eps={eps}; best defect {defects[chosen]:.4f}, "
                       "try a larger q")
    sampled = recheck = 0.0
    if verify:
        seeds = derive_seeds(seed, 2)
        sampled = _sampled_defect(lip, chosen, net_size, seeds[0])
        recheck = _sampled_defect(lip, chosen, net_size, seeds[1])
        if max(sampled, recheck) > defects[chosen] + 1e-9:
            raise NumericalFailure(f"sampled defect {max(sampled, recheck):.3e} exceeds the certified "
                                   f"{defects[chosen]:.3e}")
    block_sizes = [1] if chosen == 0 else spec.block_sizes
    return RcpCertificate(
        eps=eps, success=success, n=chosen, rank=sum(block_sizes), block_sizes=block_sizes,
        range_dim=1 if chosen == 0 else len(_cesaro_support(spec, chosen)),
        defect=defects[chosen], sampled_defect=sampled, recheck_defect=recheck,
        alpha="trace state" if chosen == 0 else f"lattice Cesàro mean of degree {chosen}",
        beta="unitization" if chosen == 0 else "inclusion",
    )


class AfnResult:
    """Rank bound together with the operator system Y = alpha(X) and its quotient Lip-norm."""

    def __init__(self, certificate: RcpCertificate, lip_y: QuotientLip):
        self.certificate = certificate
        self.lip_y = lip_y

    @property
    def rank(self) -> int:
        return self.certificate.rank

    @property
    def system(self) -> OperatorSystem:
        return self.lip_y.system


def afn_upper(lip: TorusActionLip, eps: float, net_size: int = 8, seed: int = 0) -> AfnResult:
    """
    Upper bound for the approximating dimension at eps, realized by
    Y = alpha(X) with the quotient Lip-norm induced through alpha.
    """
    certificate = rcp_upper(lip, eps, net_size=net_size, seed=seed)
    return AfnResult(certificate, cesaro_quotient(lip, certificate.n)[1])


def _cesaro_support(spec: TorusSpec, n: int) -> List[Index]:
    return [k for k in spec.residues() if lattice_multiplier(spec, n, k) > 1e-12]


def cesaro_quotient(lip: TorusActionLip, n: int) -> Tuple[UcpMap, QuotientLip]:
    """
    The compression x -> sigma_n(x) onto its range Y, and the Lip-norm it
    induces on Y. n = 0 compresses to the one-point system through the trace.
    """
    system = lip.system
    spec = lip.spec
    if n == 0:
        return trace_state(system), QuotientLip(lip, trace_state(system), OperatorSystem.one_point())
    keep = _cesaro_support(spec, n)
    target = OperatorSystem([spec.monomial(k) for k in keep], name=f"sigma_{n}({system.name})")
    images = np.stack([cesaro_mean(b, n, spec) for b in system.basis])
    phi = UcpMap(system, images, certificate="lattice Cesàro mean")
    return phi, QuotientLip(lip, phi, target)


def uniformity_probe(q_max: int, n: int, ell_name: str = "euclidean", net_size: int = 6,
                     seed: int = 0) -> List[Dict[str, object]]:
    """
    Certified and sampled defects of sigma_n on the d=2 models with coprime
    (p, q), q <= q_max and q > n. Each row carries the relative spread of the
    certified defect over p at its q.
    """
    rows = []
    for q in range(max(2, n + 1), q_max + 1):
        cells = []
        for p in range(1, q):
            if math.gcd(p, q) != 1:
                continue
            lip = torus_lipnorm(clock_shift_algebra(2, q, p), LengthFn.by_name(ell_name, 2))
            certified = _defect(lip, n)
            sampled = _sampled_defect(lip, n, net_size, seed)
            cells.append({"q": q, "p": p, "n": n, "certified_defect": certified, "sampled_defect": sampled})
        values = np.array([c["certified_defect"] for c in cells])
        spread = float((values.max() - values.min()) / values.max()) if values.max() > 0 else 0.0
        for cell in cells:
            cell["relative_spread"] = spread
        rows += cells
    return rows


def total_boundedness_report(family: Sequence[TorusActionLip], eps_grid: Sequence[float]) -> List[Dict[str, float]]:
    """
    For a family of torus Lip-norms: the largest certified diameter bound and,
    for each eps, the largest approximating-rank upper bound.
    """
    if not family:
        raise InputError("the family is empty")
    diameters = []
    for lip in family:
        upper = diameter_upper_bound(lip)
        diameters.append(2.0 * lip.mean_length() if upper is None else upper)
    max_diameter = max(diameters)
    rows = []
    for eps in eps_grid:
        ranks = [rcp_upper(lip, eps, verify=False) for lip in family]
        rows.append({"eps": float(eps), "max_diameter": max_diameter,
                     "max_afn_upper": max(c.rank for c in ranks),
                     "all_reached": all(c.success for c in ranks)})
    return rows
