"""Trust-region LP subproblem of the l1 penalty method.

The subproblem

    min  p'd + omega * sum(alpha)
    s.t. -alpha <= c + J d <= alpha,   l <= d <= u

is solved in the equivalent equality form with split residuals

    J d - e+ + e- = -c,   e+, e- >= 0,   cost omega on e+ and e-,

so that ``alpha = e+ + e-`` at an optimum.  The dual simplex needs finite
bounds; ``e+/-`` get an upper bound that exceeds any residual reachable
inside the box, which leaves the optimal solution unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatch
from .simplex import AT_LOWER, BASIC, Basis, DualSimplex, _factor, _SingularBasis


@dataclass
class LpSubproblem:
    c_k: np.ndarray
    J_k: sp.spmatrix
    p: np.ndarray
    omega: float
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.c_k = np.asarray(self.c_k, dtype=float)
        self.J_k = sp.csc_matrix(self.J_k)
        self.p = np.asarray(self.p, dtype=float)
        self.l = np.asarray(self.l, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        m, n = self.J_k.shape
        if self.c_k.shape != (m,) or self.p.shape != (n,) or self.l.shape != (n,) or self.u.shape != (n,):
            raise DimensionMismatch("inconsistent subproblem dimensions")
        if np.any(self.l > 0) or np.any(self.u < 0):
            raise ValueError("step bounds must satisfy l <= 0 <= u")
        if not (np.all(np.isfinite(self.l)) and np.all(np.isfinite(self.u))):
            raise ValueError("step bounds must be finite")

    @classmethod
    def at(cls, prob, x_k, c_k, J_k, delta):
        """Subproblem at ``x_k`` with trust radius ``delta``."""
        l = np.maximum(prob.lb - x_k, -delta)
        u = np.minimum(prob.ub - x_k, delta)
        # rounding can push a bound a hair past zero for x_k on its bound
        l = np.minimum(l, 0.0)
        u = np.maximum(u, 0.0)
        return cls(c_k, J_k, prob.p, prob.omega, l, u)

    @property
    def shape(self):
        return self.J_k.shape

    def objective(self, d):
        return float(self.p @ d + self.omega * np.abs(self.c_k + self.J_k @ d).sum())


@dataclass
class LpSolution:
    d: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    basis: Basis
    pivots: int
    degenerate: bool
    objective: float


def _residual_caps(sp_):
    m, n = sp_.shape
    reach = np.maximum(np.abs(sp_.l), np.abs(sp_.u))
    return 2.0 * (np.abs(sp_.c_k) + abs(sp_.J_k) @ reach) + 1.0


def _equality_form(sp_):
    m, n = sp_.shape
    I = sp.identity(m, format="csc")
    A = sp.hstack([sp_.J_k, -I, I], format="csc")
    cost = np.concatenate([sp_.p, np.full(2 * m, sp_.omega)])
    cap = _residual_caps(sp_)
    lo = np.concatenate([sp_.l, np.zeros(2 * m)])
    up = np.concatenate([sp_.u, cap, cap])
    return A, -sp_.c_k, cost, lo, up


def slack_basis(sp_):
    """Basis of residual columns; always nonsingular."""
    m, n = sp_.shape
    # e+ basic where the residual at d = 0 is positive, e- otherwise
    basic = np.where(sp_.c_k >= 0, n + np.arange(m), n + m + np.arange(m))
    status = np.full(n + 2 * m, AT_LOWER, dtype=np.int8)
    status[basic] = BASIC
    return Basis(basic, status)


def column_basis(sp_, columns):
    """Basis made of the step columns ``columns`` (len m), or None if singular."""
    m, n = sp_.shape
    columns = np.asarray(columns, dtype=int)
    if columns.shape != (m,):
        return None
    try:
        _factor(sp_.J_k, columns)
    except _SingularBasis:
        return None
    status = np.full(n + 2 * m, AT_LOWER, dtype=np.int8)
    status[columns] = BASIC
    return Basis(columns.copy(), status)


def _usable(A, basis, N):
    if basis is None or basis.status.shape != (N,) or basis.basic.shape != (A.shape[0],):
        return False
    try:
        _factor(A, basis.basic)
    except _SingularBasis:
        return False
    return True


def solve_subproblem(sp_, warm=None, crash_columns=None):
    """Solve the subproblem, warm-starting from ``warm`` when it is usable.

    Without a usable warm basis the solver starts from the step columns
    ``crash_columns`` if they give a nonsingular basis, and from the residual
    slack basis otherwise.  Multipliers follow the sign convention
    ``p + omega J'lam - mu - nu = 0`` with ``lam`` in ``[-1, 1]``,
    ``mu >= 0`` and ``nu <= 0``.
    """
    m, n = sp_.shape
    A, b, cost, lo, up = _equality_form(sp_)
    N = n + 2 * m
    if _usable(A, warm, N):
        start = warm
    else:
        start = None
        if crash_columns is not None:
            start = column_basis(sp_, crash_columns)
        if start is None:
            start = slack_basis(sp_)
    res = DualSimplex(A, b, cost, lo, up).solve(start)
    d = res.x[:n]
    alpha = np.abs(sp_.c_k + sp_.J_k @ d)
    lam = np.clip(-res.y / sp_.omega, -1.0, 1.0)
    rc = res.reduced_costs[:n]
    mu = np.maximum(rc, 0.0)
    nu = np.minimum(rc, 0.0)
    return LpSolution(
        d=d,
        alpha=alpha,
        lam=lam,
        mu=mu,
        nu=nu,
        basis=res.basis,
        pivots=res.pivots,
        degenerate=res.degenerate,
        objective=float(sp_.p @ d + sp_.omega * alpha.sum()),
    )


def extract_multipliers(sol, sets):
    """Drop bound multipliers that belong to trust-region faces.

    ``sets`` are the bound-active sets at ``x_k + d_k``; a multiplier on a
    coordinate that is only stopped by the trust region carries no
    information about the original problem.
    """
    mu = np.zeros_like(sol.mu)
    nu = np.zeros_like(sol.nu)
    lo = np.fromiter(sets.lower, dtype=int, count=len(sets.lower))
    up = np.fromiter(sets.upper, dtype=int, count=len(sets.upper))
    mu[lo] = sol.mu[lo]
    nu[up] = sol.nu[up]
    return sol.lam.copy(), mu, nu
