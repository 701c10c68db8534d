"""
Validate Suite

Self-checks of the building blocks: Lip-norm axioms, the state/map
correspondence, the two-point closed form, diameters across matrix levels,
the norm bound, f-Leibniz behaviour, u.c.p. extension, torus models and the
neighborhood-set bounds.
"""

from typing import Any, Dict, List, Tuple

import numpy as np

from cqms_config import ExperimentConfig, TorusSpace, ValidateSection
from cqms_lipnorms import FunctionalLip, LipNorm, check_f_leibniz, eval_lip_n, leibniz_rule, validate_lipnorm
from cqms_matrix import min_eigenvalue, operator_norm
from cqms_metrics import (
    check_diambound,
    derive_seeds,
    diameter,
    diameter_upper_bound,
    make_admissible,
    random_level_hermitian,
    rho_ln,
    two_point_lipnorm,
)
from cqms_nctorus import LengthFn
from cqms_opsys import OperatorSystem, UcpMap, extend_to_ambient, random_ucp, state_of_ucp, ucp_of_state
from cqms_suite_base import SuiteBase, SuiteOutput
from cqms_types import CheckReport, InputError

# Maps whose Choi round trip also re-checks positivity by sampling
CHECKED_ROUND_TRIPS = 3


def contraction(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random A with 0 <= A <= 1 in M_n."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, _ = np.linalg.qr(g)
    return q @ np.diag(rng.uniform(0.0, 1.0, n)) @ q.conj().T


def two_point_state(a: np.ndarray) -> UcpMap:
    """The u.c.p. map C^2 -> M_n sending the points' indicators to A and 1 - A."""
    n = a.shape[0]
    return UcpMap(OperatorSystem.two_point(), np.stack([np.eye(n), 2.0 * a - np.eye(n)]))


def non_leibniz_lipnorm() -> FunctionalLip:
    """max(|x_11 - x_22|, |x_12| / 10, |x_21| / 10) on M_2, which breaks the Leibniz rule."""
    return FunctionalLip.from_functions(OperatorSystem.full_matrix(2), [
        lambda b: b[0, 0] - b[1, 1],
        lambda b: 0.1 * b[0, 1],
        lambda b: 0.1 * b[1, 0],
    ])


class ValidateSuite(SuiteBase):
    """
    Validation suite.

    Every check is recorded; the run fails if any of them does.
    """

    def get_suite_info(self) -> Dict[str, str]:
        return {
            "name": "validate",
            "version": "1.0.0",
            "description": "Self-checks of Lip-norms, matrix states, metrics and bridges",
            "author": "cqms",
        }

    def execute(self, config: ExperimentConfig, section: ValidateSection, output: SuiteOutput) -> None:
        seeds = derive_seeds(config.seed, 8)
        spaces = [(space, space.build(config.base_dir)) for space in section.spaces]

        for index, (space, lip) in enumerate(spaces):
            report = validate_lipnorm(lip, samples=section.samples, seed=seeds[0] + index)
            output.check(report.model_copy(update={"name": f"{report.name}[{index}:{space.kind}]"}))

        self.check_choi_round_trip(section, [lip for _, lip in spaces], seeds[1], output)
        self.check_two_point_closed_form(section, seeds[2], output)
        self.check_diameters(section, [lip for _, lip in spaces], seeds[3], output)
        self.check_norm_bound(section, [lip for _, lip in spaces], seeds[4], output)
        self.check_leibniz(section, spaces, seeds[5], output)
        self.check_extension(section, [lip for _, lip in spaces], seeds[6], output)
        for index, (space, lip) in enumerate(spaces):
            if isinstance(space, TorusSpace):
                self.check_torus_model(space, index, output)
        self.check_neighborhoods(config, section, seeds[7], output)

    def check_choi_round_trip(self, section: ValidateSection, lips: List[LipNorm], seed: int,
                              output: SuiteOutput) -> None:
        worst = 0.0
        count = 0
        for index, lip in enumerate(lips):
            for i, map_seed in enumerate(derive_seeds(seed + index, section.choi_maps)):
                n = section.levels[i % len(section.levels)]
                phi = random_ucp(lip.system, n, map_seed)
                back = ucp_of_state(state_of_ucp(phi), check=i < CHECKED_ROUND_TRIPS)
                worst = max(worst, phi.basis_distance(back))
                count += 1
        details = {"maps": count, "max_distance": worst}
        output.check(CheckReport.pass_report("choi_round_trip", details=details) if worst <= section.choi_tol
                     else CheckReport.fail_report("choi_round_trip", f"round trip moved a map by {worst:.3e}",
                                                  details))

    def check_two_point_closed_form(self, section: ValidateSection, seed: int, output: SuiteOutput) -> None:
        """The searched rho_{L,n} against d ||A - B|| on the two-point space."""
        rng = np.random.default_rng(seed)
        distances = rng.uniform(0.5, 3.0, section.closed_form_pairs)
        worst = 0.0
        for i, d in enumerate(distances):
            n = section.levels[i % len(section.levels)]
            a, b = contraction(rng, n), contraction(rng, n)
            expected = d * operator_norm(a - b)
            estimate = rho_ln(two_point_lipnorm(float(d)), two_point_state(a), two_point_state(b),
                              seed=int(rng.integers(2 ** 31)), method="search")
            worst = max(worst, abs(estimate.value - expected) / (1.0 + expected))
        details = {"pairs": len(distances), "max_relative_error": worst}
        output.check(CheckReport.pass_report("two_point_closed_form", details=details)
                     if worst <= section.closed_form_tol
                     else CheckReport.fail_report("two_point_closed_form", f"search off by {worst:.3e}", details))

    def check_diameters(self, section: ValidateSection, lips: List[LipNorm], seed: int,
                        output: SuiteOutput) -> None:
        """Diameters of the state spaces agree across matrix levels."""
        for index, lip in enumerate(lips):
            values = {}
            for n in section.levels:
                estimate = diameter(lip, n, net_size=section.net_size, seed=seed + index)
                values[n] = estimate.value
                output.estimate(f"diameter[{index}:{lip.variant}][n={n}]", estimate)
            top = max(values.values())
            spread = (top - min(values.values())) / top if top > 0 else 0.0
            upper = diameter_upper_bound(lip)
            details = {"values": {str(n): v for n, v in values.items()}, "relative_spread": spread,
                       "upper_bound": upper}
            name = f"diameter_levels[{index}]"
            if spread > section.diameter_tol:
                output.check(CheckReport.fail_report(name, f"levels disagree by {spread:.1%}", details))
            elif upper is not None and top > upper * (1.0 + 1e-9) + 1e-9:
                output.check(CheckReport.fail_report(name, f"estimate {top:.4f} above the certified {upper:.4f}",
                                                     details))
            else:
                output.check(CheckReport.pass_report(name, details=details))

    def check_norm_bound(self, section: ValidateSection, lips: List[LipNorm], seed: int,
                         output: SuiteOutput) -> None:
        """
        ||x - r 1|| <= L(x) diam / 2 with r the midpoint of the spectrum.

        Without a certified diameter the level-1 search estimate is used; it is
        a lower bound, so exceeding it is inconclusive rather than a failure.
        """
        rng = np.random.default_rng(seed)
        for index, lip in enumerate(lips):
            name = f"norm_bound[{index}]"
            reference = diameter_upper_bound(lip)
            source = "certified"
            if reference is None:
                reference = diameter(lip, 1, net_size=section.net_size, seed=seed).value
                source = "estimate"
            worst, count = -np.inf, 0
            for _ in range(section.norm_bound_samples):
                c = lip.ball.normalized(rng.standard_normal(lip.system.hermitian_dim))
                if c is None:
                    continue
                eigenvalues = np.linalg.eigvalsh(lip.system.from_herm_coords(c))
                radius = 0.5 * (eigenvalues[-1] - eigenvalues[0])
                worst = max(worst, radius - 0.5 * reference)
                count += 1
            details = {"samples": count, "diameter": reference, "diameter_source": source,
                       "max_excess": float(worst)}
            if worst <= section.norm_bound_slack:
                output.check(CheckReport.pass_report(name, details=details))
            elif source == "estimate":
                output.check(CheckReport.inconclusive_report(
                    name, f"exceeded the estimated diameter by {worst:.3e}", details))
            else:
                output.check(CheckReport.fail_report(name, f"exceeded by {worst:.3e}", details))

    def check_leibniz(self, section: ValidateSection, spaces: List[Tuple[Any, LipNorm]], seed: int,
                      output: SuiteOutput) -> None:
        for index, (space, lip) in enumerate(spaces):
            if not isinstance(space, TorusSpace):
                continue
            report = check_f_leibniz(lip, leibniz_rule, samples=section.leibniz_samples, seed=seed + index,
                                     slack=section.leibniz_slack)
            output.check(report.model_copy(update={"name": f"leibniz[{index}:q={space.q}]"}))

        counter = check_f_leibniz(non_leibniz_lipnorm(), leibniz_rule, samples=section.leibniz_samples, seed=seed)
        details = {"max_violation": counter.details.get("max_violation")}
        output.check(CheckReport.pass_report("leibniz_counterexample", details=details) if not counter.passed
                     else CheckReport.fail_report("leibniz_counterexample",
                                                  "a non-Leibniz Lip-norm went undetected", details))

    def check_extension(self, section: ValidateSection, lips: List[LipNorm], seed: int,
                        output: SuiteOutput) -> None:
        """u.c.p. maps on proper subsystems extend to the ambient algebra."""
        for index, lip in enumerate(lips):
            if lip.system.is_full_algebra() or section.extension_maps == 0:
                continue
            reports = []
            for i, map_seed in enumerate(derive_seeds(seed + index, section.extension_maps)):
                n = section.levels[i % len(section.levels)]
                result = extend_to_ambient(random_ucp(lip.system, n, map_seed))
                details = {"n": n, "status": result.status, "restriction_error": result.restriction_error,
                           "psd_margin": result.psd_margin}
                reports.append(CheckReport.pass_report(f"map{i}", details=details) if result.succeeded
                               else CheckReport.fail_report(f"map{i}", f"extension {result.status}", details))
            output.check(CheckReport.combine(f"extension[{index}]", reports))

    def check_torus_model(self, space: TorusSpace, index: int, output: SuiteOutput) -> None:
        spec = space.spec()
        defects = spec.relation_defects()
        worst = max(defects.values())
        name = f"torus_relations[{index}:q={space.q}]"
        output.check(CheckReport.pass_report(name, details=defects) if worst <= 1e-10
                     else CheckReport.fail_report(name, f"relation defect {worst:.3e}", defects))
        report = LengthFn.by_name(space.length, space.d).check_axioms()
        output.check(report.model_copy(update={"name": f"{report.name}[{index}]"}))

    def check_neighborhoods(self, config: ExperimentConfig, section: ValidateSection, seed: int,
                            output: SuiteOutput) -> None:
        """
        Neighborhood-set bounds around positive anchors with L^n = 1; r is the
        bridge's analytic distance bound.
        """
        for case_index, case in enumerate(section.diambound_cases):
            for setup in case.build(config.base_dir):
                case_seed = seed + case_index
                admissible = make_admissible(setup.lx, setup.ly, setup.bridge, seed=case_seed)
                name = f"diambound[{setup.label}]"
                r = setup.bridge.analytic_bound()
                if not admissible.certificate.passed or r is None:
                    output.check(CheckReport.fail_report(name, "bridge did not validate or has no analytic bound",
                                                         {"certificate": admissible.certificate.message}))
                    continue
                reports = []
                rng = np.random.default_rng(case_seed)
                for n in section.diambound_levels:
                    anchor = random_level_hermitian(setup.lx.system, n, rng)
                    value = eval_lip_n(setup.lx, n, anchor).upper
                    if value <= 0:
                        raise InputError(f"{setup.label}: random anchor has zero Lip-norm")
                    anchor = anchor / value
                    anchor = anchor + (0.05 - min(min_eigenvalue(anchor), 0.0)) * np.eye(anchor.shape[0])
                    report = check_diambound(admissible, n, anchor, section.diambound_lambda, r,
                                             samples=section.diambound_samples, seed=case_seed + n)
                    reports.append(report.model_copy(update={"name": f"n={n}"}))
                output.check(CheckReport.combine(name, reports))


suite_instance = ValidateSuite
