"""Cross-check backend that solves the same subproblem with HiGHS via scipy."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import LpError
from .subproblem import LpSolution, _equality_form


def solve_subproblem_highs(sp_):
    """Solve with HiGHS dual simplex; multipliers use the built-in solver's signs.

    No warm start is available through scipy, so ``basis`` is ``None`` and
    ``pivots`` reports HiGHS's own iteration count.
    """
    m, n = sp_.shape
    A, b, cost, lo, up = _equality_form(sp_)
    res = linprog(cost, A_eq=A, b_eq=b, bounds=np.column_stack([lo, up]),
                  method="highs-ds")
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    d = res.x[:n]
    alpha = np.abs(sp_.c_k + sp_.J_k @ d)
    y = res.eqlin.marginals
    lam = np.clip(-y / sp_.omega, -1.0, 1.0)
    rc = cost - sp.csc_matrix(A).T @ y
    rc = rc[:n]
    return LpSolution(
        d=d,
        alpha=alpha,
        lam=lam,
        mu=np.maximum(rc, 0.0),
        nu=np.minimum(rc, 0.0),
        basis=None,
        pivots=int(res.nit),
        degenerate=False,
        objective=float(sp_.p @ d + sp_.omega * alpha.sum()),
    )
