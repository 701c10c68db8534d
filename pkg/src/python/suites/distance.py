"""
Distance Suite

Upper bounds on the complete distance between Lip-normed operator systems,
one per configured bridge, with the analytic expectations of each bridge
family checked alongside.
"""

from typing import Dict, List, Tuple

import numpy as np

from cqms_config import BridgeSetup, DistanceCase, DistanceSection, ExperimentConfig, TriangleAudit
from cqms_metrics import compose_norm_bridges, derive_seeds, dist_upper, hausdorff_ucp, make_admissible, make_norm_bridge
from cqms_suite_base import SuiteBase, SuiteOutput, run_sweep
from cqms_types import CheckReport, EstimateKind, MetricEstimate, ValidationFailure

Accepted = Tuple[BridgeSetup, MetricEstimate]


class DistanceSuite(SuiteBase):
    """
    Distance suite.

    Bridges that fail validation are recorded as failing checks and the run
    continues with the remaining cases.
    """

    def get_suite_info(self) -> Dict[str, str]:
        return {
            "name": "distance",
            "version": "1.0.0",
            "description": "Complete-distance upper bounds from validated bridges",
            "author": "cqms",
        }

    def execute(self, config: ExperimentConfig, section: DistanceSection, output: SuiteOutput) -> None:
        seeds = derive_seeds(config.seed, len(section.cases) + 1)
        rows: List[Dict[str, object]] = []
        for case, case_seed in zip(section.cases, seeds):
            setups = case.build(config.base_dir)

            def bound(setup: BridgeSetup, seed: int) -> object:
                try:
                    return dist_upper(setup.lx, setup.ly, setup.bridge, n_max=1, deltas=section.deltas,
                                      samples=section.samples, seed=seed, net_size=section.net_size)
                except ValidationFailure as exc:
                    return exc

            results = run_sweep(bound, setups, case_seed, workers=config.workers)
            accepted: List[Accepted] = []
            for setup, result in zip(setups, results):
                if isinstance(result, ValidationFailure):
                    self.logger.error(f"{setup.label}: {result}")
                    output.check(CheckReport.fail_report(f"bridge[{setup.label}]", str(result),
                                                         result.report.details if result.report else None))
                    continue
                output.check(CheckReport.pass_report(f"bridge[{setup.label}]",
                                                     details={"kind": setup.bridge.kind,
                                                              "parameter": setup.parameter}))
                output.estimate(setup.label, result)
                accepted.append((setup, result))
                rows.append({"case": case.name, "label": setup.label, "bridge": setup.bridge.kind,
                             "parameter": setup.parameter, "value": result.value, "kind": str(result.kind)})

            self.check_case(case, accepted, section, output)
            if case.bridge.kind == "norm" and section.hausdorff_level > 0 and accepted:
                self.hausdorff(accepted[0][0], section, case_seed, output)

        if section.triangle is not None:
            self.audit_triangle(config, section.triangle, section, seeds[-1], output)
        output.table("distances", rows)

    def check_case(self, case: DistanceCase, accepted: List[Accepted], section: DistanceSection,
                   output: SuiteOutput) -> None:
        """Compare the bounds of a case with what its bridge family predicts."""
        if not accepted:
            return
        kind = case.bridge.kind
        if kind == "scaling":
            constant = accepted[0][0].bridge.constant
            worst = max(abs(est.value - constant / setup.parameter) for setup, est in accepted)
            details = {"constant": constant, "max_error": worst}
            output.check(CheckReport.pass_report(f"scaling_law[{case.name}]", details=details) if worst <= 1e-12
                         else CheckReport.fail_report(f"scaling_law[{case.name}]",
                                                      f"bounds deviate from C / lambda by {worst:.3e}", details))
        elif kind == "quotient":
            setup, est = accepted[0]
            expected = setup.bridge.epsilon + setup.bridge.eta
            details = {"epsilon": setup.bridge.epsilon, "eta": setup.bridge.eta, "bound": est.value}
            output.check(CheckReport.pass_report(f"quotient_bound[{case.name}]", details=details)
                         if abs(est.value - expected) <= 1e-12
                         else CheckReport.fail_report(f"quotient_bound[{case.name}]",
                                                      f"bound {est.value:.6f} != eps + eta = {expected:.6f}", details))
        elif kind == "point":
            self.extrapolate_point(case, accepted, section, output)

    def extrapolate_point(self, case: DistanceCase, accepted: List[Accepted], section: DistanceSection,
                          output: SuiteOutput) -> None:
        """Linear fit of the point-bridge bounds in gamma, read off at gamma = 0."""
        name = f"point_limit[{case.name}]"
        if len(accepted) < 2 or accepted[0][0].bridge.diameters is None:
            output.check(CheckReport.inconclusive_report(name, "need two bounded point bridges to extrapolate"))
            return
        gammas = np.array([setup.parameter for setup, _ in accepted])
        values = np.array([est.value for _, est in accepted])
        slope, intercept = np.polyfit(gammas, values, 1)
        dx, dy = accepted[0][0].bridge.diameters
        limit = max(float(intercept), 0.0)
        output.estimate(f"{case.name}[gamma->0]",
                        MetricEstimate(value=limit, kind=EstimateKind.UPPER,
                                       params={"gammas": gammas.tolist(), "slope": float(slope)}))
        gap = abs(limit - (dx + dy))
        details = {"limit": limit, "diameter_sum": dx + dy, "gap": gap}
        output.check(CheckReport.pass_report(name, details=details) if gap <= section.extrapolation_tol
                     else CheckReport.fail_report(name, f"limit {limit:.4f} is {gap:.4f} away from "
                                                        f"diam X + diam Y = {dx + dy:.4f}", details))

    def hausdorff(self, setup: BridgeSetup, section: DistanceSection, seed: int, output: SuiteOutput) -> None:
        """Heuristic Hausdorff value of the state spaces, recorded next to the certified bound."""
        admissible = make_admissible(setup.lx, setup.ly, setup.bridge, section.deltas, section.samples, seed)
        estimate = hausdorff_ucp(admissible, section.hausdorff_level, net_size=section.net_size, seed=seed)
        output.estimate(f"{setup.label}:hausdorff[n={section.hausdorff_level}]", estimate)

    def audit_triangle(self, config: ExperimentConfig, audit: TriangleAudit, section: DistanceSection, seed: int,
                       output: SuiteOutput) -> None:
        """Bounds from X -> Y -> Z against the composed bridge X -> Z."""
        lx, ly, lz = (space.build(config.base_dir) for space in (audit.x, audit.y, audit.z))
        first, second = make_norm_bridge(audit.eps_xy), make_norm_bridge(audit.eps_yz)
        composed = compose_norm_bridges(first, second)
        seeds = derive_seeds(seed, 3)
        try:
            xy = dist_upper(lx, ly, first, n_max=1, deltas=section.deltas, samples=section.samples, seed=seeds[0])
            yz = dist_upper(ly, lz, second, n_max=1, deltas=section.deltas, samples=section.samples, seed=seeds[1])
            xz = dist_upper(lx, lz, composed, n_max=1, deltas=section.deltas, samples=section.samples,
                            seed=seeds[2])
        except ValidationFailure as exc:
            output.check(CheckReport.fail_report("triangle", str(exc)))
            return
        for name, estimate in (("xy", xy), ("yz", yz), ("xz", xz)):
            output.estimate(f"triangle:{name}", estimate)
        excess = xz.value - xy.value - yz.value
        details = {"xy": xy.value, "yz": yz.value, "xz": xz.value}
        output.check(CheckReport.pass_report("triangle", details=details) if excess <= 1e-12
                     else CheckReport.fail_report("triangle", f"composed bound exceeds the sum by {excess:.3e}",
                                                  details))


suite_instance = DistanceSuite
