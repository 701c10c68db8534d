"""
Noncommutative Torus Suite

Clock-shift models of rational noncommutative tori: Fejér bounds and the
Cesàro compressions they control, completely positive approximation
certificates, uniformity in the phases and total boundedness of the family.
"""

import math
from typing import Any, Dict, List, Tuple

import numpy as np

from cqms_config import ExperimentConfig, FejerCheckSection, NctorusSection
from cqms_lipnorms import validate_lipnorm
from cqms_matrix import operator_norm, random_hermitian
from cqms_metrics import derive_seeds
from cqms_nctorus import (
    FourierPolynomial,
    LengthFn,
    afn_upper,
    cesaro_by_partial_sums,
    cesaro_mean,
    clock_shift_algebra,
    fejer_bound,
    fejer_inequality_check,
    fejer_kernel,
    fejer_kernel_series,
    lattice_fejer_bound,
    rcp_upper,
    torus_lipnorm,
    total_boundedness_report,
    uniformity_probe,
)
from cqms_suite_base import SuiteBase, SuiteOutput, run_sweep
from cqms_types import CheckReport, EstimateKind, MetricEstimate

KERNEL_TOL = 1e-10
MASS_TOL = 1e-8
CESARO_TOL = 1e-10
# Random polynomials per check of the Cesàro mean's two descriptions
CESARO_SAMPLES = 8
# Solver accuracy of Lip-ball support points
SAMPLED_SLACK = 1e-6


def _tol_report(name: str, value: float, tol: float, details: Dict[str, Any]) -> CheckReport:
    if value <= tol:
        return CheckReport.pass_report(name, details=details)
    return CheckReport.fail_report(name, f"{value:.3e} exceeds {tol:.1e}", details)


class NctorusSuite(SuiteBase):
    """
    Noncommutative torus suite.
    """

    def get_suite_info(self) -> Dict[str, str]:
        return {
            "name": "nctorus",
            "version": "1.0.0",
            "description": "Rational noncommutative tori: Fejér bounds, rank certificates and uniformity",
            "author": "cqms",
        }

    def execute(self, config: ExperimentConfig, section: NctorusSection, output: SuiteOutput) -> None:
        seeds = derive_seeds(config.seed, 5)
        ell = LengthFn.by_name(section.length, 2)

        self.check_kernel(section.fejer, output)
        self.check_cesaro(section.fejer, seeds[0], output)
        spec = clock_shift_algebra(2, section.fejer.q, section.fejer.p)
        output.check(fejer_inequality_check(spec, section.fejer.degrees, ell, samples=section.fejer.samples,
                                            poly_degree=section.fejer.poly_degree, seed=seeds[1],
                                            slack=section.fejer.slack, grid=section.fejer.grid))

        self.sweep(config, section, ell, seeds[2], output)
        self.certificates(config, section, seeds[3], output)

        rows = uniformity_probe(section.uniformity_q_max, section.uniformity_degree, section.length,
                                net_size=section.uniformity_net_size, seed=seeds[4])
        output.table("uniformity", rows)
        spread = max(row["relative_spread"] for row in rows)
        excess = max(row["sampled_defect"] - row["certified_defect"] for row in rows)
        details = {"max_relative_spread": spread, "max_sampled_excess": excess, "cells": len(rows)}
        if excess > SAMPLED_SLACK:
            output.check(CheckReport.fail_report("uniformity", f"sampled defect above certified by {excess:.3e}",
                                                 details))
        else:
            output.check(_tol_report("uniformity", spread, section.uniformity_tol, details))

        family = [torus_lipnorm(clock_shift_algebra(2, q, 1), ell) for q in section.boundedness_qs]
        rows = total_boundedness_report(family, section.eps_grid)
        output.table("total_boundedness", rows)
        unreached = [row["eps"] for row in rows if not row["all_reached"]]
        details = {"qs": list(section.boundedness_qs), "max_diameter": rows[0]["max_diameter"] if rows else None}
        output.check(CheckReport.pass_report("total_boundedness", details=details) if not unreached
                     else CheckReport.fail_report("total_boundedness", f"no certificate at eps {unreached}", details))

    def check_kernel(self, fejer: FejerCheckSection, output: SuiteOutput) -> None:
        """Closed form against the series, and unit mass."""
        t = np.arange(fejer.kernel_points) / fejer.kernel_points
        gap, mass = 0.0, 0.0
        for n in fejer.degrees:
            closed = fejer_kernel(n, t)
            gap = max(gap, float(np.abs(closed - fejer_kernel_series(n, t)).max()))
            mass = max(mass, abs(float(np.mean(closed)) - 1.0))
        output.check(_tol_report("fejer_kernel", gap, KERNEL_TOL, {"max_gap": gap, "degrees": list(fejer.degrees)}))
        output.check(_tol_report("fejer_mass", mass, MASS_TOL, {"max_mass_error": mass}))

    def check_cesaro(self, fejer: FejerCheckSection, seed: int, output: SuiteOutput) -> None:
        """
        The multiplier form against the average of partial sums, and the
        lattice average on the model: unital, contractive, and equal to the
        multiplier while no frequency aliases.
        """
        rng = np.random.default_rng(seed)
        spec = clock_shift_algebra(2, fejer.q, fejer.p)
        forms, aliasing, contraction = 0.0, 0.0, 0.0
        unit = max((operator_norm(cesaro_mean(np.eye(spec.size), n, spec) - np.eye(spec.size))
                   for n in fejer.degrees if n < spec.q), default=0.0)
        for _ in range(CESARO_SAMPLES):
            a = FourierPolynomial.random(2, min(fejer.poly_degree, spec.q - 1), rng)
            for n in fejer.degrees:
                diff = cesaro_mean(a, n) - cesaro_by_partial_sums(a, n)
                forms = max(forms, max((abs(c) for c in diff.coefficients.values()), default=0.0))
                if n >= spec.q:
                    continue
                if a.degree + n < spec.q:
                    lattice = cesaro_mean(a.to_matrix(spec), n, spec)
                    aliasing = max(aliasing, operator_norm(lattice - cesaro_mean(a, n).to_matrix(spec)))
                x = random_hermitian(rng, spec.size)
                contraction = max(contraction, operator_norm(cesaro_mean(x, n, spec)) - operator_norm(x))
        output.check(_tol_report("cesaro_forms", forms, CESARO_TOL, {"max_gap": forms}))
        output.check(_tol_report("cesaro_model", max(unit, aliasing, contraction), CESARO_TOL,
                                 {"unit": unit, "multiplier_gap": aliasing, "contraction_excess": contraction}))

    def sweep(self, config: ExperimentConfig, section: NctorusSection, ell: LengthFn, seed: int,
              output: SuiteOutput) -> None:
        """Fejér bound, achieved lattice defect and rank over (q, p, n)."""
        bounds = {n: fejer_bound(n, ell, 2) for n in section.degrees}
        cells = [(q, p) for q in section.qs for p in range(1, q) if math.gcd(p, q) == 1]

        def cell(qp: Tuple[int, int], _: int) -> List[Dict[str, Any]]:
            q, p = qp
            spec = clock_shift_algebra(2, q, p)
            return [{"q": q, "p": p, "n": n, "fejer_bound": bounds[n].value,
                     "quadrature_error": bounds[n].error_estimate,
                     "achieved_eps": lattice_fejer_bound(q, 2, n, ell), "rank": spec.rank}
                    for n in section.degrees if n < q]

        rows = [row for cell_rows in run_sweep(cell, cells, seed, workers=config.workers) for row in cell_rows]
        output.table("torus_sweep", rows)
        for n, bound in bounds.items():
            output.estimate(f"fejer_bound[n={n}]",
                            MetricEstimate(value=bound.value, kind=EstimateKind.EXACT,
                                           bracket=(max(bound.value - bound.error_estimate, 0.0),
                                                    bound.value + bound.error_estimate),
                                           params={"points": bound.points, "length": ell.name}))

    def certificates(self, config: ExperimentConfig, section: NctorusSection, seed: int,
                     output: SuiteOutput) -> None:
        """Rank certificates at the Fejér-bound eps, and the quotient system they realize."""
        rcp = section.rcp
        lip = rcp.space.build(config.base_dir)
        eps = fejer_bound(rcp.degree, lip.ell, rcp.space.d).value + rcp.margin
        certificate = rcp_upper(lip, eps, net_size=rcp.net_size, seed=seed)
        afn = afn_upper(lip, eps, net_size=rcp.net_size, seed=seed)
        output.table("certificates", [{"kind": "rcp", **certificate.model_dump()},
                                      {"kind": "afn", **afn.certificate.model_dump(),
                                       "quotient_dim": afn.system.dim}])
        params = {"eps": eps, "q": rcp.space.q, "n": certificate.n}
        output.estimate("rcp_rank", MetricEstimate(value=certificate.rank, kind=EstimateKind.UPPER, seed=seed,
                                                   params=params))
        output.estimate("afn_rank", MetricEstimate(value=afn.rank, kind=EstimateKind.UPPER, seed=seed, params=params))
        details = {"eps": eps, "n": certificate.n, "defect": certificate.defect,
                   "sampled_defect": max(certificate.sampled_defect, certificate.recheck_defect)}
        output.check(CheckReport.pass_report("rcp_certificate", details=details) if certificate.success
                     else CheckReport.fail_report("rcp_certificate", f"no Cesàro degree reaches eps={eps:.4f}",
                                                  details))
        output.check(CheckReport.pass_report("afn_below_rcp", details={"afn": afn.rank, "rcp": certificate.rank})
                     if afn.rank <= certificate.rank
                     else CheckReport.fail_report("afn_below_rcp", f"afn {afn.rank} > rcp {certificate.rank}"))
        report = validate_lipnorm(afn.lip_y, samples=rcp.net_size, seed=seed)
        output.check(report.model_copy(update={"name": "quotient_lipnorm"}))


suite_instance = NctorusSuite
