"""
cqms - Convex Programming Helpers

Thin layer over cvxpy: solver selection with fallback, and epigraph
constraints for max-of-operator-norm seminorms written over real coordinates.
"""

from typing import List, Sequence

import cvxpy as cp
import numpy as np

from cqms_logger import get_logger
from cqms_matrix import realify
from cqms_types import NumericalFailure

SOLVER_ORDER = ("CLARABEL", "SCS")
ACCEPTED_STATUSES = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)

logger = get_logger("convex")


def solve(problem: cp.Problem, label: str) -> float:
    """
    Solve a problem with the first solver that reaches an optimal status.

    Args:
        problem: The cvxpy problem
        label: Short description used in log messages

    Returns:
        The optimal value

    Raises:
        NumericalFailure: if no installed solver succeeds
    """
    installed = set(cp.installed_solvers())
    for solver in SOLVER_ORDER:
        if solver not in installed:
            continue
        try:
            problem.solve(solver=solver)
        except cp.SolverError as exc:
            logger.warning(f"{label}: {solver} raised {exc}; trying next solver")
            continue
        if problem.status in ACCEPTED_STATUSES:
            if problem.status == cp.OPTIMAL_INACCURATE:
                logger.warning(f"{label}: {solver} returned an inaccurate solution")
            logger.debug(f"{label}: {solver} status={problem.status} value={problem.value}")
            return float(problem.value)
        logger.warning(f"{label}: {solver} finished with status {problem.status}")
    raise NumericalFailure(f"{label}: no solver reached an optimal status")


def stack_operator(stack: np.ndarray) -> np.ndarray:
    """
    Real matrix sending coordinates c to vec_F(realify(sum_a c_a A[a])).

    Args:
        stack: complex array of shape (r, p, q)

    Returns:
        Array of shape (4*p*q, r)
    """
    r = stack.shape[0]
    columns = [realify(stack[a]).ravel(order="F") for a in range(r)]
    return np.stack(columns, axis=1)


def norm_epigraph(stack: np.ndarray, coords: cp.Expression, t: cp.Expression | float) -> List[cp.Constraint]:
    """
    Constraints expressing ||sum_a coords_a A[a]|| <= t for real coordinates.
    """
    r, p, q = stack.shape
    if p == 1 and q == 1:
        re = stack[:, 0, 0].real
        im = stack[:, 0, 0].imag
        if np.allclose(im, 0.0):
            return [cp.abs(re @ coords) <= t]
        return [cp.norm(cp.hstack([re @ coords, im @ coords]), 2) <= t]
    op = stack_operator(stack)
    matrix = cp.reshape(op @ coords, (2 * p, 2 * q), order="F")
    return [cp.sigma_max(matrix) <= t]


def max_norm_epigraph(stacks: Sequence[np.ndarray], coords: cp.Expression,
                      t: cp.Expression | float) -> List[cp.Constraint]:
    constraints: List[cp.Constraint] = []
    for stack in stacks:
        constraints.extend(norm_epigraph(stack, coords, t))
    return constraints


def realified(expr: cp.Expression) -> cp.Expression:
    """Real block form [[Re, -Im], [Im, Re]] of a complex cvxpy expression."""
    re = cp.real(expr)
    im = cp.imag(expr)
    return cp.bmat([[re, -im], [im, re]])
