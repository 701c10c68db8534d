"""
cqms - Metrics

Metrics on matrix state spaces, diameters, bridges between Lip-normed systems,
admissible direct-sum Lip-norms and bounds on the distance they induce.

Suprema over Lip balls are reported as certified lower bounds carrying the
element that attains them; distances between systems are reported as
analytic upper bounds from named bridges, or as heuristic brackets.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np

from cqms_convex import realified, solve
from cqms_lipnorms import (
    ActionLip,
    DirectSumLip,
    FunctionalLip,
    LipBall,
    LipNorm,
    NormTerms,
    ScaledLip,
    eval_lip_e,
    eval_lip_n,
)
from cqms_logger import get_logger
from cqms_matrix import (
    as_matrix,
    eigh,
    hermitian_part,
    inverse_sqrt_psd,
    is_hermitian,
    min_eigenvalue,
    operator_norm,
    random_unit_vectors,
    split_blocks,
)
from cqms_opsys import (
    CpMap,
    DirectSumSystem,
    OperatorSystem,
    UcpMap,
    compression,
    random_ucp,
    scalar_embedding,
    trace_state,
    vector_state,
)
from cqms_types import (
    CheckReport,
    CMatrix,
    EstimateKind,
    InputError,
    MetricEstimate,
    NumericalFailure,
    ValidationFailure,
    Witness,
)

ZERO_TOL = 1e-12
ASCENT_TOL = 1e-10
MAX_ASCENT = 20
DEFAULT_DELTAS = (0.1, 0.01, 1e-6)

logger = get_logger("metrics")


def derive_seeds(seed: int, count: int) -> List[int]:
    """Independent child seeds from numpy's SeedSequence."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def _element_witness(system: OperatorSystem, c: np.ndarray, value: float, label: str = "element") -> Witness:
    return Witness(label=label, matrices=[CMatrix.from_array(system.from_herm_coords(c))], value=float(value))


def xi_grid(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Unit vectors for the inner operator-norm problem: Fibonacci points on the
    Bloch sphere for n = 2, Gaussian vectors plus the standard basis otherwise.
    """
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    if n == 2:
        i = np.arange(size) + 0.5
        theta = np.arccos(1.0 - 2.0 * i / size)
        phi = np.pi * (1.0 + np.sqrt(5.0)) * i
        return np.stack([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], axis=1)
    return np.concatenate([np.eye(n, dtype=complex), random_unit_vectors(rng, n, max(size - n, 0))])


def _norm_of(c: np.ndarray, diff: np.ndarray) -> Tuple[float, np.ndarray]:
    m = np.einsum("a,aij->ij", c, diff)
    values, vectors = np.linalg.eigh(hermitian_part(m))
    index = int(np.argmax(np.abs(values)))
    return float(abs(values[index])), vectors[:, index]


def _alternating_sup(ball: LipBall, diff: np.ndarray, xi: np.ndarray,
                     starts: Sequence[np.ndarray], seeds: int = 4) -> Tuple[float, Optional[np.ndarray]]:
    """
    max { ||sum_a c_a D[a]|| : L(c) <= 1 } by alternating between the best unit
    vector and the support point of the corresponding linear functional.
    """
    best, best_c = 0.0, None
    scores = np.zeros(len(xi))
    grid = np.einsum("gi,aij,gj->ga", xi.conj(), diff, xi).real
    for c in starts:
        value, _ = _norm_of(c, diff)
        if value > best:
            best, best_c = value, c
        scores = np.maximum(scores, np.abs(grid @ c))
    order = list(np.argsort(-scores)[:seeds]) if starts else list(range(min(seeds, len(xi))))
    initial = [xi[i] for i in order]
    if best_c is not None:
        initial.append(_norm_of(best_c, diff)[1])

    for vector in initial:
        previous = -np.inf
        for _ in range(MAX_ASCENT):
            g = np.einsum("i,aij,j->a", vector.conj(), diff, vector).real
            try:
                _, _, c = ball.support(g)
            except NumericalFailure as exc:
                logger.warning(f"support problem failed during ascent: {exc}")
                break
            value, vector = _norm_of(c, diff)
            if value > best:
                best, best_c = value, c
            if value - previous <= ASCENT_TOL:
                break
            previous = value
    return best, best_c


def rho_ln(lip: LipNorm, phi: CpMap, psi: CpMap, grid_size: int = 200, seed: int = 0,
           method: str = "auto") -> MetricEstimate:
    """
    rho_{L,n}(phi, psi) = sup { ||phi(x) - psi(x)|| : L(x) <= 1 }.

    Closed forms are used when the Hermitian dimension is at most 2, and the
    level-1 value is a single support-function program. Otherwise the value is
    a certified lower bound from alternating maximization, with the maximizing
    element stored as witness. method="search" forces the search.

    Raises:
        InputError: if the maps live on different systems or levels
    """
    system = lip.system
    if phi.n != psi.n:
        raise InputError(f"maps have different levels {phi.n} and {psi.n}")
    if phi.source.dim != system.dim or psi.source.dim != system.dim or \
            phi.source.ambient_dim != system.ambient_dim or psi.source.ambient_dim != system.ambient_dim:
        raise InputError("maps are not defined on the Lip-norm's system")
    n = phi.n
    params: Dict[str, Any] = {"grid_size": grid_size, "method": method}
    diff = phi.herm_images - psi.herm_images
    if system.hermitian_dim == 1 or np.abs(diff).max() <= ZERO_TOL:
        return MetricEstimate(value=0.0, kind=EstimateKind.EXACT, n=n, seed=seed, params=params)

    if method != "search" and system.hermitian_dim == 2:
        unit = lip.evaluate_coords(np.array([0.0, 1.0]))
        norm = operator_norm(diff[1])
        if unit.kind == "exact":
            return MetricEstimate(value=norm / unit.value, kind=EstimateKind.EXACT, n=n, seed=seed,
                                  params=params,
                                  witnesses=[_element_witness(system, np.array([0.0, 1.0 / unit.value]), norm / unit.value)])
        return MetricEstimate(value=norm / unit.upper, kind=EstimateKind.LOWER, n=n, seed=seed,
                              bracket=(norm / unit.upper, norm / max(unit.lower, ZERO_TOL)), params=params)

    ball = lip.ball
    if n == 1 and method != "search":
        value, _, c = ball.support(diff[:, 0, 0].real)
        return MetricEstimate(value=abs(value), kind=EstimateKind.EXACT, n=1, seed=seed, params=params,
                              witnesses=[_element_witness(system, c, abs(value))])

    rng = np.random.default_rng(seed)
    starts = list(ball.pool)
    for _ in range(4):
        c = ball.normalized(rng.standard_normal(system.hermitian_dim))
        if c is not None:
            starts.append(c)
    value, c = _alternating_sup(ball, diff, xi_grid(n, grid_size, rng), starts)
    witnesses = [] if c is None else [_element_witness(system, c, value)]
    return MetricEstimate(value=value, kind=EstimateKind.LOWER, n=n, seed=seed, params=params,
                          witnesses=witnesses)


def diameter_upper_bound(lip: LipNorm) -> Optional[float]:
    """
    Certified upper bound on the diameter, when one is available:
    the closed form for Hermitian dimension 2, group averaging for action
    Lip-norms whose samples form a finite ergodic group, and rescaling for
    scaled Lip-norms.
    """
    system = lip.system
    if system.hermitian_dim == 1:
        return 0.0
    if system.hermitian_dim == 2:
        h = system.hermitian_basis[1]
        unit = lip.evaluate_coords(np.array([0.0, 1.0]))
        values = np.linalg.eigvalsh(h)
        return float((values[-1] - values[0]) / max(unit.lower, ZERO_TOL))
    if isinstance(lip, ScaledLip):
        inner = diameter_upper_bound(lip.inner)
        return None if inner is None else inner / lip.factor
    if isinstance(lip, ActionLip):
        mean = lip.finite_group_mean_length()
        return None if mean is None else 2.0 * mean
    return None


def _vector_state_coords(system: OperatorSystem, v: np.ndarray) -> np.ndarray:
    return np.einsum("i,aij,j->a", v.conj(), system.hermitian_basis, v).real


def _spread_ascent(lip: LipNorm, starts: Sequence[np.ndarray]) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    max over the Lip ball of lambda_max(x) - lambda_min(x), alternating between
    extreme eigenvectors and support points. Returns (spread, c, v_hi, v_lo).
    """
    system = lip.system
    best = (-1.0, None, None, None)
    for c in starts:
        previous = -np.inf
        for _ in range(MAX_ASCENT):
            dec = eigh(system.from_herm_coords(c))
            spread = dec.max - dec.min
            hi, lo = dec.eigenvectors[:, -1], dec.eigenvectors[:, 0]
            if spread > best[0]:
                best = (spread, c, hi, lo)
            if spread - previous <= ASCENT_TOL:
                break
            previous = spread
            g = _vector_state_coords(system, hi) - _vector_state_coords(system, lo)
            try:
                _, _, c = lip.ball.support(g)
            except NumericalFailure as exc:
                logger.warning(f"support problem failed during spread ascent: {exc}")
                break
    return best


def ucp_net(system: OperatorSystem, n: int, size: int, seed: int,
            states: Sequence[CpMap] = ()) -> List[UcpMap]:
    """
    Sampled net of UCP_n(X): random maps, pure compressions V* x V, and the
    scalar embeddings x -> omega(x) 1_n of the given states.
    """
    seeds = derive_seeds(seed, 2 * size)
    net: List[UcpMap] = [scalar_embedding(s, n) for s in states]
    net += [random_ucp(system, n, s) for s in seeds[:size]]
    k = system.ambient_dim
    if n <= k:
        for s in seeds[size:size + max(1, size // 2)]:
            rng = np.random.default_rng(s)
            g = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
            q, _ = np.linalg.qr(g)
            net.append(compression(system, q[:, :n]))
    return net


def diameter(lip: LipNorm, n: int = 1, net_size: int = 8, seed: int = 0) -> MetricEstimate:
    """
    Diameter of UCP_n(X) under rho_{L,n}.

    The level-1 search maximizes the spread of a Lip-1 element; higher levels
    evaluate rho_{L,n} on a net that contains the scalar embeddings of the
    level-1 extremal states, so the level-n lower bound never falls below the
    level-1 one.
    """
    system = lip.system
    params = {"net_size": net_size}
    upper = diameter_upper_bound(lip)
    if system.hermitian_dim <= 2:
        return MetricEstimate(value=upper, kind=EstimateKind.EXACT, n=n, seed=seed, params=params)

    rng = np.random.default_rng(seed)
    starts = [c for c in (lip.ball.normalized(rng.standard_normal(system.hermitian_dim))
                          for _ in range(net_size)) if c is not None]
    starts += [c for c in (lip.ball.normalized(e) for e in np.eye(system.hermitian_dim)[1:]) if c is not None]
    spread, c, hi, lo = _spread_ascent(lip, starts)
    witnesses = [_element_witness(system, c, spread),
                 Witness(label="states", matrices=[CMatrix.from_array(hi[:, None]), CMatrix.from_array(lo[:, None])])]
    value = spread

    if n > 1:
        states = [vector_state(system, hi), vector_state(system, lo)]
        net = ucp_net(system, n, net_size, seed, states)
        pool = list(lip.ball.pool)
        scored = []
        for i in range(len(net)):
            for j in range(i + 1, len(net)):
                diff = net[i].herm_images - net[j].herm_images
                score = max((_norm_of(p, diff)[0] for p in pool), default=0.0)
                scored.append((score, i, j))
        scored.sort(key=lambda item: -item[0])
        pairs = [(0, 1)] + [(i, j) for _, i, j in scored[:4] if (i, j) != (0, 1)]
        for i, j in pairs:
            estimate = rho_ln(lip, net[i], net[j], seed=seed)
            if estimate.value > value:
                value = estimate.value
                witnesses = list(estimate.witnesses)
    bracket = None if upper is None else (value, max(value, upper))
    return MetricEstimate(value=value, kind=EstimateKind.LOWER, n=n, seed=seed, bracket=bracket,
                          witnesses=witnesses, params=params)


class Bridge(ABC):
    """
    Seminorm N on X ⊕ Y with N(1, 1) = 0 and N(1, 0) != 0, compiled to norm
    terms on the direct-sum coordinates.
    """

    kind: str = "abstract"

    @abstractmethod
    def terms_on(self, system: DirectSumSystem) -> NormTerms:
        """Norm terms of N on the sum system's Hermitian coordinates."""

    def analytic_bound(self) -> Optional[float]:
        """Uniform distance bound guaranteed by the bridge, if it has one."""
        return None

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        pass

    def to_spec(self) -> Dict[str, Any]:
        return {"kind": self.kind, **self.params()}


class NormBridge(Bridge):
    """N(x, y) = ||x - y|| / epsilon for X and Y inside the same M_k."""

    kind = "norm"

    def __init__(self, epsilon: float):
        if not epsilon > 0:
            raise InputError(f"epsilon must be positive, got {epsilon}")
        self.epsilon = float(epsilon)

    def terms_on(self, system: DirectSumSystem) -> NormTerms:
        kx, ky = system.x_system.ambient_dim, system.y_system.ambient_dim
        if kx != ky:
            raise InputError("a norm bridge needs both systems in the same matrix algebra")
        herm = system.hermitian_basis
        return NormTerms([(herm[:, :kx, :kx] - herm[:, kx:, kx:]) / self.epsilon])

    def analytic_bound(self) -> float:
        return self.epsilon

    def params(self) -> Dict[str, Any]:
        return {"epsilon": self.epsilon}


class PointBridge(Bridge):
    """N(x, y) = |sigma0(x) - omega0(y)| / gamma."""

    kind = "point"

    def __init__(self, gamma: float, sigma0: CpMap, omega0: CpMap,
                 diameters: Optional[Tuple[float, float]] = None):
        if not gamma > 0:
            raise InputError(f"gamma must be positive, got {gamma}")
        if sigma0.n != 1 or omega0.n != 1:
            raise InputError("point bridges are built from states")
        self.gamma = float(gamma)
        self.sigma0 = sigma0
        self.omega0 = omega0
        self.diameters = diameters

    def terms_on(self, system: DirectSumSystem) -> NormTerms:
        kx = system.x_system.ambient_dim
        values = [self.sigma0.apply(h[:kx, :kx])[0, 0] - self.omega0.apply(h[kx:, kx:])[0, 0]
                  for h in system.hermitian_basis]
        return NormTerms([np.array(values).reshape(-1, 1, 1) / self.gamma])

    def analytic_bound(self) -> Optional[float]:
        if self.diameters is None:
            return None
        return self.diameters[0] + self.diameters[1] + self.gamma

    def params(self) -> Dict[str, Any]:
        return {"gamma": self.gamma, "diameters": self.diameters}


class QuotientBridge(Bridge):
    """N(x, y) = ||Phi(x) - y|| / eta for a unital c.p. map Phi: X -> Y."""

    kind = "quotient"

    def __init__(self, eta: float, phi: CpMap, epsilon: Optional[float] = None):
        if not eta > 0:
            raise InputError(f"eta must be positive, got {eta}")
        if epsilon is not None and not epsilon > 0:
            raise InputError(f"epsilon must be positive, got {epsilon}")
        self.eta = float(eta)
        self.phi = phi
        self.epsilon = epsilon

    def terms_on(self, system: DirectSumSystem) -> NormTerms:
        kx = system.x_system.ambient_dim
        if self.phi.n != system.y_system.ambient_dim:
            raise InputError("quotient bridge map lands in the wrong matrix size")
        stack = [(self.phi.apply(h[:kx, :kx]) - h[kx:, kx:]) / self.eta for h in system.hermitian_basis]
        return NormTerms([np.stack(stack)])

    def analytic_bound(self) -> Optional[float]:
        return None if self.epsilon is None else self.epsilon + self.eta

    def params(self) -> Dict[str, Any]:
        return {"eta": self.eta, "epsilon": self.epsilon}


class ScalingBridge(Bridge):
    """N(x, mu) = (lambda / C) ||x - mu 1|| between (X, lambda L) and the one-point space."""

    kind = "scaling"

    def __init__(self, lam: float, constant: float):
        if not lam > 0 or not constant > 0:
            raise InputError("lambda and C must be positive")
        self.lam = float(lam)
        self.constant = float(constant)

    def terms_on(self, system: DirectSumSystem) -> NormTerms:
        if system.y_system.ambient_dim != 1:
            raise InputError("a scaling bridge connects to the one-point space")
        kx = system.x_system.ambient_dim
        herm = system.hermitian_basis
        stack = herm[:, :kx, :kx] - herm[:, kx:, kx:][:, 0, 0][:, None, None] * np.eye(kx)[None]
        return NormTerms([stack * self.lam / self.constant])

    def analytic_bound(self) -> float:
        return self.constant / self.lam

    def params(self) -> Dict[str, Any]:
        return {"lambda": self.lam, "C": self.constant}


def make_norm_bridge(epsilon: float) -> NormBridge:
    return NormBridge(epsilon)


def make_point_bridge(gamma: float, sigma0: CpMap, omega0: CpMap,
                      diameters: Optional[Tuple[float, float]] = None) -> PointBridge:
    return PointBridge(gamma, sigma0, omega0, diameters)


def make_quotient_bridge(eta: float, phi: CpMap, epsilon: Optional[float] = None) -> QuotientBridge:
    return QuotientBridge(eta, phi, epsilon)


def make_scaling_bridge(lam: float, constant: float) -> ScalingBridge:
    return ScalingBridge(lam, constant)


def compose_norm_bridges(first: NormBridge, second: NormBridge) -> NormBridge:
    """Norm bridge X -> Z from X -> Y and Y -> Z; its bound is the sum of the two."""
    return NormBridge(first.epsilon + second.epsilon)


def zero_lipnorm(system: OperatorSystem) -> FunctionalLip:
    """The zero seminorm, which is a Lip-norm exactly on the one-point system."""
    if system.hermitian_dim != 1:
        raise InputError("the zero seminorm is a Lip-norm only on the one-point system")
    return FunctionalLip(system, [np.zeros((1, 1, 1))])


def two_point_lipnorm(distance: float) -> FunctionalLip:
    """L(x) = |x_1 - x_2| / d on C^2, the metric space of two points at distance d."""
    if not distance > 0:
        raise InputError(f"the two points need a positive distance, got {distance}")
    system = OperatorSystem.two_point()
    return FunctionalLip(system, [np.array([0.0, 2.0 / distance])])


def _best_partner(lip: DirectSumLip, c_fixed: np.ndarray, fixed_side: str) -> float:
    """min over the other summand b of max(L_other(b), N(fixed, b))."""
    system: DirectSumSystem = lip.system
    other = lip.ly if fixed_side == "x" else lip.lx
    b = cp.Variable(other.system.hermitian_dim)
    t = cp.Variable()
    if fixed_side == "x":
        pair = system.embed_x @ c_fixed + system.embed_y @ b
    else:
        pair = system.embed_x @ b + system.embed_y @ c_fixed
    constraints = other.epigraph(b, t) + lip.bridge_terms.epigraph(pair, t)
    problem = cp.Problem(cp.Minimize(t), constraints)
    return solve(problem, f"bridge partner ({fixed_side})")


def validate_bridge(bridge: Bridge, lx: LipNorm, ly: LipNorm, deltas: Sequence[float] = DEFAULT_DELTAS,
                    samples: int = 8, seed: int = 0) -> CheckReport:
    """
    Check both bridge conditions: N(1,1) = 0 with N(1,0) != 0, and for every
    sampled a with L_X(a) = 1 some b with max(L_Y(b), N(a,b)) <= L_X(a) + delta
    (and symmetrically). Basis elements are always among the samples, so a pass
    at the smallest delta also certifies that the combined Lip-norm induces
    L_X and L_Y as quotients.
    """
    lip = DirectSumLip(lx, ly, bridge)
    system: DirectSumSystem = lip.system
    ux = system.x_system.unit_coords
    uy = system.y_system.unit_coords
    n_unit = lip.bridge_terms.value(system.pair_coords(ux, uy))
    n_sep = lip.bridge_terms.value(system.pair_coords(ux, np.zeros_like(uy)))
    details: Dict[str, Any] = {"N(1,1)": n_unit, "N(1,0)": n_sep}
    if n_unit > 1e-9 or n_sep <= 1e-9:
        return CheckReport.fail_report("bridge", "condition (i) fails: need N(1,1) = 0 and N(1,0) != 0", details)

    rng = np.random.default_rng(seed)
    worst, worst_side = -np.inf, None
    for side, own in (("x", lx), ("y", ly)):
        r = own.system.hermitian_dim
        candidates = [own.ball.normalized(e) for e in np.eye(r)[1:]]
        candidates += [own.ball.normalized(rng.standard_normal(r)) for _ in range(samples)]
        for c in candidates:
            if c is None:
                continue
            own_value = own.evaluate_coords(c).value
            try:
                best = _best_partner(lip, c, side)
            except NumericalFailure as exc:
                return CheckReport.inconclusive_report("bridge", f"partner search failed: {exc}", details)
            excess = best - own_value
            if excess > worst:
                worst, worst_side = excess, side
    details.update({"worst_excess": float(worst), "worst_side": worst_side,
                    "passes_at": [d for d in deltas if worst <= d]})
    if worst <= min(deltas):
        return CheckReport.pass_report("bridge", f"conditions hold down to delta = {min(deltas)}", details)
    return CheckReport.fail_report("bridge", f"condition (ii) fails by {worst:.3e} on side {worst_side}", details)


@dataclass(frozen=True)
class AdmissibleLip:
    """max(L_X, L_Y, N) together with the report certifying it induces L_X and L_Y."""
    lip: DirectSumLip
    certificate: CheckReport

    @property
    def system(self) -> DirectSumSystem:
        return self.lip.system

    @property
    def bridge(self) -> Bridge:
        return self.lip.bridge

    def lift(self, phi: CpMap, side: str) -> CpMap:
        """phi composed with the projection of X ⊕ Y onto one summand."""
        index = 0 if side == "x" else 1
        return phi.precompose(self.system, lambda b: self.system.split(b)[index])


def make_admissible(lx: LipNorm, ly: LipNorm, bridge: Bridge, deltas: Sequence[float] = DEFAULT_DELTAS,
                    samples: int = 8, seed: int = 0) -> AdmissibleLip:
    lip = DirectSumLip(lx, ly, bridge)
    report = validate_bridge(bridge, lx, ly, deltas, samples, seed)
    logger.info(f"bridge {bridge.kind}: {'valid' if report.passed else 'invalid'} ({report.message})")
    return AdmissibleLip(lip=lip, certificate=report)


@dataclass
class MatchResult:
    psi: UcpMap
    estimate: MetricEstimate
    sdp_lower: float


def _choi_apply(choi: Any, y: np.ndarray, n: int) -> Any:
    k = y.shape[0]
    expr = 0
    for a in range(k):
        for b in range(k):
            if y[a, b] != 0:
                expr = expr + complex(y[a, b]) * choi[a * n:(a + 1) * n, b * n:(b + 1) * n]
    return expr


def _ucp_from_choi(target: OperatorSystem, choi: np.ndarray, n: int) -> UcpMap:
    k = target.ambient_dim
    choi = hermitian_part(choi)
    lam = min_eigenvalue(choi)
    if lam < 0:
        mix = -lam / (1.0 / k - lam) + 1e-12
        choi = (1.0 - mix) * choi + mix * np.eye(k * n) / k
    blocks = choi.reshape(k, n, k, n).transpose(0, 2, 1, 3)
    images = np.einsum("mab,abij->mij", target.basis, blocks)
    inv = inverse_sqrt_psd(hermitian_part(images[0]))
    images = np.einsum("ij,mjk,kl->mil", inv, images, inv)
    images[0] = np.eye(n)
    return UcpMap(target, images, certificate="choi")


def match_ucp(phi: UcpMap, admissible: AdmissibleLip, rounds: int = 3, side: str = "x",
              seed: int = 0) -> MatchResult:
    """
    Best-found psi in UCP_n of the other summand for phi on one summand.

    Each round minimizes the largest discrepancy over a pool of Lip-1 witness
    elements with a Choi-matrix program, then measures rho_{L,n} of the result
    and adds its witness to the pool. The program value is a certified lower
    bound on the distance from phi to the other matrix state space.
    """
    system = admissible.system
    lip = admissible.lip
    source, target = (system.x_system, system.y_system) if side == "x" else (system.y_system, system.x_system)
    if phi.source.dim != source.dim or phi.source.ambient_dim != source.ambient_dim:
        raise InputError(f"map is not defined on the {side} summand")
    other = "y" if side == "x" else "x"
    n = phi.n
    lifted = admissible.lift(phi, side)

    if target.hermitian_dim == 1:
        psi = UcpMap(target, np.eye(n)[None], certificate="unique")
        estimate = rho_ln(lip, lifted, admissible.lift(psi, other), seed=seed)
        return MatchResult(psi, estimate, 0.0)

    rng = np.random.default_rng(seed)
    r = system.hermitian_dim
    pool = [c for c in (lip.ball.normalized(e) for e in np.eye(r)[1:]) if c is not None]
    pool += [c for c in (lip.ball.normalized(rng.standard_normal(r)) for _ in range(4)) if c is not None]
    pool += list(lip.ball.pool)

    k = target.ambient_dim
    best: Optional[MatchResult] = None
    lower = 0.0
    for round_index in range(rounds):
        choi = cp.Variable((k * n, k * n), hermitian=True)
        t = cp.Variable()
        constraints = [choi >> 0, _choi_apply(choi, np.eye(k), n) == np.eye(n)]
        for c in pool:
            xs, ys = system.split(system.from_herm_coords(c))
            own, theirs = (xs, ys) if side == "x" else (ys, xs)
            gap = -_choi_apply(choi, theirs, n) + phi.apply(own)
            constraints.append(cp.sigma_max(realified(gap)) <= t)
        problem = cp.Problem(cp.Minimize(t), constraints)
        try:
            lower = max(lower, solve(problem, "match_ucp"))
        except NumericalFailure as exc:
            logger.warning(f"matching round {round_index} failed: {exc}")
            break
        psi = _ucp_from_choi(target, np.asarray(choi.value), n)
        estimate = rho_ln(lip, lifted, admissible.lift(psi, other), seed=seed + round_index)
        if best is None or estimate.value < best.estimate.value:
            best = MatchResult(psi, estimate, lower)
        for w in estimate.witnesses:
            pool.append(system.herm_coords(w.matrices[0].to_array()).real)

    if best is None:
        psi = scalar_embedding(trace_state(target), n)
        best = MatchResult(psi, rho_ln(lip, lifted, admissible.lift(psi, other), seed=seed), lower)
    best.sdp_lower = lower
    return best


def hausdorff_ucp(admissible: AdmissibleLip, n: int, net_size: int = 4, seed: int = 0,
                  rounds: int = 2) -> MetricEstimate:
    """
    Heuristic bracket on the Hausdorff distance between UCP_n(X) and UCP_n(Y)
    inside UCP_n(X ⊕ Y) under the admissible Lip-norm.

    Raises:
        InputError: if the admissibility certificate did not pass
    """
    if not admissible.certificate.passed:
        raise InputError("admissibility certificate missing or failed")
    system = admissible.system
    seeds = derive_seeds(seed, 2)
    lower, upper = 0.0, 0.0
    witnesses: List[Witness] = []
    for side, own, net_seed in (("x", system.x_system, seeds[0]), ("y", system.y_system, seeds[1])):
        for index, phi in enumerate(ucp_net(own, n, net_size, net_seed)):
            result = match_ucp(phi, admissible, rounds=rounds, side=side, seed=net_seed + index)
            lower = max(lower, result.sdp_lower)
            if result.estimate.value > upper:
                upper = result.estimate.value
                witnesses = list(result.estimate.witnesses)
    upper = max(upper, lower)
    return MetricEstimate(value=upper, kind=EstimateKind.HEURISTIC, n=n, seed=seed, bracket=(lower, upper),
                          witnesses=witnesses, params={"net_size": net_size, "rounds": rounds})


def dist_upper(lx: LipNorm, ly: LipNorm, bridge: Bridge, n_max: int = 2,
               deltas: Sequence[float] = DEFAULT_DELTAS, samples: int = 8, seed: int = 0,
               net_size: int = 4) -> MetricEstimate:
    """
    Upper bound on the complete distance between (X, L_X) and (Y, L_Y) from a
    bridge: its analytic bound when it has one, otherwise the largest
    heuristic Hausdorff value over levels 1..n_max.

    Raises:
        ValidationFailure: if the bridge fails validation
    """
    admissible = make_admissible(lx, ly, bridge, deltas, samples, seed)
    if not admissible.certificate.passed:
        raise ValidationFailure(f"bridge {bridge.kind} is not valid: {admissible.certificate.message}",
                                admissible.certificate)
    bound = bridge.analytic_bound()
    witness = Witness(label="bridge", note=f"{bridge.kind} {bridge.params()}")
    if bound is not None:
        return MetricEstimate(value=bound, kind=EstimateKind.UPPER, seed=seed, witnesses=[witness],
                              params=bridge.to_spec())
    estimates = [hausdorff_ucp(admissible, n, net_size=net_size, seed=seed) for n in range(1, n_max + 1)]
    best = max(estimates, key=lambda e: e.value)
    return MetricEstimate(value=best.value, kind=EstimateKind.HEURISTIC, n=best.n, seed=seed,
                          bracket=(max(e.bracket[0] for e in estimates), best.value),
                          witnesses=[witness] + list(best.witnesses),
                          params={**bridge.to_spec(), "n_max": n_max})


@dataclass
class NeighborhoodSet:
    """
    {z in M_n ⊗ Y : L^n(x ⊕ z) <= lam} for an anchor x in M_n ⊗ X, sampled
    through the sufficient convex condition L(Re) + L(Im) <= lam on every entry.
    """
    admissible: AdmissibleLip
    n: int
    anchor: np.ndarray
    lam: float
    witnesses: List[np.ndarray] = field(default_factory=list)

    def contains(self, z: np.ndarray) -> bool:
        system = self.admissible.system
        xb = split_blocks(self.anchor, self.n)
        zb = split_blocks(z, self.n)
        pairs = [system.pair(xb[i, j], zb[i, j]) for i in range(self.n) for j in range(self.n)]
        upper = max(eval_lip_e(self.admissible.lip, p, refine=False).upper for p in pairs)
        return upper <= self.lam * (1.0 + 1e-9)

    def sample(self, count: int, seed: int) -> List[np.ndarray]:
        system = self.admissible.system
        lip = self.admissible.lip
        target = system.y_system
        n, r = self.n, target.hermitian_dim
        xb = split_blocks(self.anchor, n)
        rng = np.random.default_rng(seed)

        re_vars, im_vars = {}, {}
        constraints = []
        slack_terms = []
        for i in range(n):
            for j in range(i, n):
                cx = np.asarray(system.x_system.herm_coords(xb[i, j]), dtype=complex)
                yr = cp.Variable(r)
                yi = cp.Variable(r) if i != j else None
                tr, ti = cp.Variable(), cp.Variable()
                constraints += lip.epigraph(system.embed_x @ cx.real + system.embed_y @ yr, tr)
                if yi is not None:
                    constraints += lip.epigraph(system.embed_x @ cx.imag + system.embed_y @ yi, ti)
                    constraints.append(tr + ti <= self.lam)
                else:
                    constraints.append(tr <= self.lam)
                    constraints.append(ti == 0)
                slack_terms.append(tr + ti)
                re_vars[i, j], im_vars[i, j] = yr, yi

        objectives = [cp.Minimize(sum(slack_terms))]
        for _ in range(max(count - 1, 0)):
            weights = {key: rng.standard_normal(r) for key in re_vars}
            linear = sum(weights[key] @ re_vars[key] for key in re_vars)
            objectives.append(cp.Maximize(linear))

        found: List[np.ndarray] = []
        for objective in objectives:
            problem = cp.Problem(objective, constraints)
            try:
                solve(problem, "neighborhood witness")
            except NumericalFailure:
                continue
            z = self._assemble(re_vars, im_vars, target)
            if self.contains(z):
                found.append(z)
        self.witnesses.extend(found)
        return found

    def _assemble(self, re_vars: Dict, im_vars: Dict, target: OperatorSystem) -> np.ndarray:
        n, k = self.n, target.ambient_dim
        blocks = np.zeros((n, n, k, k), dtype=complex)
        for (i, j), yr in re_vars.items():
            c = np.asarray(yr.value, dtype=complex)
            if im_vars[i, j] is not None:
                c = c + 1j * np.asarray(im_vars[i, j].value)
            block = target.from_herm_coords(c)
            if i == j:
                block = hermitian_part(block)
            blocks[i, j] = block
            blocks[j, i] = block.conj().T
        return blocks.transpose(0, 2, 1, 3).reshape(n * k, n * k)


def random_level_hermitian(system: OperatorSystem, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random self-adjoint element of M_n ⊗ X, as an nk x nk block matrix."""
    k = system.ambient_dim
    blocks = np.zeros((n, n, k, k), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            blocks[i, j] = system.random_element(rng) if i != j else system.random_hermitian(rng)
            blocks[j, i] = blocks[i, j].conj().T
    return blocks.transpose(0, 2, 1, 3).reshape(n * k, n * k)


def _sampled_hausdorff(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    d = np.array([[operator_norm(x - y) for y in b] for x in a])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def check_diambound(admissible: AdmissibleLip, n: int, x: object, lam: float, r_estimate: float,
                    samples: int = 6, seed: int = 0, anchor_shift: float = 0.05) -> CheckReport:
    """
    Sampled check of the norm, diameter, cross-anchor and near-positivity
    bounds on neighborhood sets N^lam(x) for self-adjoint x in M_n ⊗ X.

    Raises:
        InputError: if lam <= 2 L^n(x)
    """
    anchor = as_matrix(x)
    if not is_hermitian(anchor):
        raise InputError("anchor must be self-adjoint")
    lx = admissible.lip.lx
    level_value = eval_lip_n(lx, n, anchor).upper
    if not lam > 2.0 * level_value:
        raise InputError(f"lambda = {lam} must exceed 2 L^n(x) = {2.0 * level_value}")

    radius = lam * n ** 4 * r_estimate
    tol = 1e-7 * (1.0 + operator_norm(anchor))
    seeds = derive_seeds(seed, 3)
    first = NeighborhoodSet(admissible, n, anchor, lam)
    witnesses = first.sample(samples, seeds[0])
    details: Dict[str, Any] = {"lambda": lam, "r": r_estimate, "n": n, "witnesses": len(witnesses)}
    if not witnesses:
        return CheckReport.inconclusive_report("diambound", "no neighborhood witness found", details)

    reports = []
    norm_excess = max(operator_norm(z) for z in witnesses) - operator_norm(anchor) - 2.0 * radius
    reports.append(CheckReport.pass_report("norm_bound", details={"excess": norm_excess}) if norm_excess <= tol
                   else CheckReport.fail_report("norm_bound", f"exceeded by {norm_excess:.3e}"))

    spread = max((operator_norm(a - b) for a in witnesses for b in witnesses), default=0.0)
    reports.append(CheckReport.pass_report("diameter_bound", details={"diameter": spread, "bound": 8 * radius})
                   if spread <= 8 * radius + tol
                   else CheckReport.fail_report("diameter_bound", f"diameter {spread:.3e} > {8 * radius:.3e}"))

    rng = np.random.default_rng(seeds[1])
    direction = random_level_hermitian(admissible.system.x_system, n, rng)
    direction_value = eval_lip_n(lx, n, direction).upper
    headroom = 0.5 * lam - level_value
    shift = anchor_shift if direction_value == 0 else min(anchor_shift, 0.5 * headroom / direction_value)
    moved = anchor + shift * direction
    second = NeighborhoodSet(admissible, n, moved, lam).sample(samples, seeds[2])
    if second:
        distance = _sampled_hausdorff(witnesses, second)
        bound = 8 * radius + 4 * operator_norm(moved - anchor)
        reports.append(CheckReport.pass_report("cross_anchor", details={"hausdorff": distance, "bound": bound})
                       if distance <= bound + tol
                       else CheckReport.fail_report("cross_anchor", f"{distance:.3e} > {bound:.3e}"))
    else:
        reports.append(CheckReport.inconclusive_report("cross_anchor", "no witness for the shifted anchor"))

    if min_eigenvalue(anchor) >= -tol:
        lowest = min(min_eigenvalue(z) for z in witnesses)
        reports.append(CheckReport.pass_report("near_positivity", details={"min_eigenvalue": lowest})
                       if lowest >= -2 * radius - tol
                       else CheckReport.fail_report("near_positivity", f"eigenvalue {lowest:.3e} below bound"))

    report = CheckReport.combine("diambound", reports)
    return report.model_copy(update={"details": {**report.details, **details}})
