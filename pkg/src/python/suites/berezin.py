"""
Berezin Suite

Matrix algebras converging to the sphere: for each spin j, a heuristic bridge
constant from Berezin symbols, the Berezin-transform residual and the
resulting distance bound, with the symbol maps' properties checked.
"""

from typing import Any, Dict, List, Tuple

import numpy as np

from cqms_berezin import (
    CoherentProjection,
    SphereGrid,
    SpinRep,
    berezin_residual,
    berezin_row,
    matrix_level_bound_check,
    rotation_samples,
    sphere_lip_norms,
    symbol_property_report,
)
from cqms_config import BerezinSection, ExperimentConfig
from cqms_metrics import derive_seeds
from cqms_suite_base import SuiteBase, SuiteOutput, run_sweep
from cqms_types import CheckReport, EstimateKind, MetricEstimate

STRUCTURE_TOL = 1e-10


class BerezinSuite(SuiteBase):
    """
    Berezin suite.

    All spins share the rotation sample and the sampled functions, so the
    sweep compares like with like.
    """

    def get_suite_info(self) -> Dict[str, str]:
        return {
            "name": "berezin",
            "version": "1.0.0",
            "description": "Spin-j matrix algebras against the sphere through Berezin symbols",
            "author": "cqms",
        }

    def execute(self, config: ExperimentConfig, section: BerezinSection, output: SuiteOutput) -> None:
        grid = SphereGrid(section.grid_theta, section.grid_phi)
        sweep_seed, check_seed = derive_seeds(config.seed, 2)

        def cell(j: float, seed: int) -> Tuple[Dict[str, Any], List[CheckReport]]:
            rep = SpinRep(j)
            row = berezin_row(j, grid, rotations=section.rotations, samples=section.samples, seed=sweep_seed)
            row["jz_residual"] = berezin_residual(rep.jz / rep.j, rep, grid)
            reports = [symbol_property_report(rep, grid, samples=section.property_samples, seed=seed),
                       self.structure_report(rep)]
            if section.level_maps > 0 and section.levels:
                lip_a, lip_b = sphere_lip_norms(rep, grid, rotation_samples(section.rotations, sweep_seed))
                report = matrix_level_bound_check(rep, grid, lip_a, lip_b, levels=section.levels,
                                                  maps=section.level_maps, samples=section.samples, seed=seed)
                reports.append(report.model_copy(update={"name": f"{report.name}[j={rep.j}]"}))
            return row, reports

        results = run_sweep(cell, list(section.spins), check_seed, workers=config.workers)
        rows = []
        for row, reports in results:
            rows.append(row)
            for report in reports:
                output.check(report)
            params = {"grid": list(grid.shape), "rotations": section.rotations, "samples": section.samples}
            output.estimate(f"gamma[j={row['j']}]",
                            MetricEstimate(value=row["gamma_hat"], kind=EstimateKind.HEURISTIC, seed=sweep_seed,
                                           params=params))
            output.estimate(f"distance[j={row['j']}]",
                            MetricEstimate(value=row["upper_bound"], kind=EstimateKind.HEURISTIC, seed=sweep_seed,
                                           params={**params, "max_residual": row["max_residual"]}))
        output.table("berezin", rows)
        if len(rows) >= 2:
            self.check_trends(rows, output)

    def structure_report(self, rep: SpinRep) -> CheckReport:
        """Angular-momentum relations and the highest-weight projection."""
        defects = {**rep.relation_defects(), **CoherentProjection.highest_weight(rep).defects(rep)}
        worst = max(defects.values())
        name = f"spin_structure[j={rep.j}]"
        if worst <= STRUCTURE_TOL:
            return CheckReport.pass_report(name, details=defects)
        return CheckReport.fail_report(name, f"defect {worst:.3e}", defects)

    def check_trends(self, rows: List[Dict[str, Any]], output: SuiteOutput) -> None:
        """Residuals and bridge constants shrink from the smallest to the largest spin."""
        first = min(rows, key=lambda r: r["j"])
        last = max(rows, key=lambda r: r["j"])
        details = {"j": [first["j"], last["j"]], "jz_residual": [first["jz_residual"], last["jz_residual"]]}
        output.check(CheckReport.pass_report("residual_decay", details=details)
                     if last["jz_residual"] < 0.5 * first["jz_residual"]
                     else CheckReport.fail_report("residual_decay", "J_z/j residual did not halve", details))
        details = {"j": [first["j"], last["j"]], "gamma_hat": [first["gamma_hat"], last["gamma_hat"]]}
        output.check(CheckReport.pass_report("gamma_decay", details=details)
                     if last["gamma_hat"] < first["gamma_hat"]
                     else CheckReport.fail_report("gamma_decay", "bridge constant did not decrease", details))
        slope = float(np.polyfit(np.log([r["j"] for r in rows]), np.log([max(r["upper_bound"], 1e-300) for r in rows]),
                                 1)[0])
        self.logger.info(f"distance bound decays like j^{slope:.2f}")


suite_instance = BerezinSuite
