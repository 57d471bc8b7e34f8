"""Trust-region LP subproblems and the dual simplex that solves them."""

from .simplex import AT_LOWER, AT_UPPER, BASIC, Basis, DualSimplex, SimplexResult
from .subproblem import (
    LpSolution,
    LpSubproblem,
    column_basis,
    extract_multipliers,
    slack_basis,
    solve_subproblem,
)

__all__ = [
    "AT_LOWER", "AT_UPPER", "BASIC", "Basis", "DualSimplex", "SimplexResult",
    "LpSolution", "LpSubproblem", "column_basis", "extract_multipliers",
    "slack_basis", "solve_subproblem",
]
