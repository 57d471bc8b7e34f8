"""Bounded-variable revised dual simplex for  min c'x  s.t.  A x = b,  lo <= x <= up.

All bounds must be finite.  That restriction is what makes the method
self-starting: any basis can be made dual feasible by putting each nonbasic
variable on the bound its reduced cost prefers, so no phase I is needed.

The basis matrix is refactorized with SuperLU after every pivot and the
primal and dual values are recomputed from scratch.  The LPs solved here are
a few hundred rows at most and warm starts keep pivot counts low, so the
simpler bookkeeping is worth more than update formulas.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NumericalStall, Unbounded

BASIC = 0
AT_LOWER = 1
AT_UPPER = 2


@dataclass
class Basis:
    """Warm-start descriptor: basic column per row and a status per column."""

    basic: np.ndarray
    status: np.ndarray

    def copy(self):
        return Basis(self.basic.copy(), self.status.copy())


@dataclass
class SimplexResult:
    x: np.ndarray
    y: np.ndarray
    reduced_costs: np.ndarray
    objective: float
    basis: Basis
    pivots: int
    degenerate: bool


class _SingularBasis(Exception):
    pass


def _factor(A, basic):
    B = A[:, basic].tocsc()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            lu = spla.splu(B, permc_spec="COLAMD")
    except (RuntimeError, spla.MatrixRankWarning, RuntimeWarning):
        raise _SingularBasis from None
    # SuperLU happily factors nearly singular matrices; reject tiny pivots
    diagU = np.abs(lu.U.diagonal())
    if diagU.size and diagU.min() <= 1e-11 * max(1.0, diagU.max()):
        raise _SingularBasis
    return lu


class DualSimplex:
    """Solver instance for one constraint matrix; bounds and costs may change.

    ``ptol`` is the primal feasibility tolerance, ``dtol`` the dual
    feasibility tolerance and ``pivtol`` the smallest acceptable pivot
    magnitude.
    """

    def __init__(self, A, b, cost, lo, up, ptol=1e-9, dtol=1e-9, pivtol=1e-9, max_pivots=None):
        self.A = sp.csc_matrix(A, dtype=float)
        m, N = self.A.shape
        self.AT = self.A.T.tocsr()
        self.b = np.asarray(b, dtype=float)
        self.cost = np.asarray(cost, dtype=float)
        self.lo = np.asarray(lo, dtype=float)
        self.up = np.asarray(up, dtype=float)
        if self.b.shape != (m,) or self.cost.shape != (N,) or self.lo.shape != (N,) or self.up.shape != (N,):
            raise ValueError("inconsistent LP dimensions")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.up))):
            raise ValueError("the bounded dual simplex needs finite bounds on every column")
        if np.any(self.lo > self.up):
            raise ValueError("lower bound exceeds upper bound")
        self.ptol, self.dtol, self.pivtol = ptol, dtol, pivtol
        self.max_pivots = max_pivots if max_pivots is not None else 50 * (m + N) + 1000
        self.fixed = self.up - self.lo <= 0.0

    # -- basis handling ---------------------------------------------------
    def _place_nonbasic(self, status, d):
        """Put every nonbasic column on the bound its reduced cost favours."""
        nb = status != BASIC
        status[nb & (d > self.dtol)] = AT_LOWER
        status[nb & (d < -self.dtol)] = AT_UPPER
        status[nb & self.fixed] = AT_LOWER

    def _values(self, basic, status, lu):
        x = np.where(status == AT_UPPER, self.up, self.lo)
        x[basic] = 0.0
        rhs = self.b - self.A @ x
        x[basic] = lu.solve(rhs)
        return x

    def _duals(self, basic, lu):
        y = lu.solve(self.cost[basic], trans="T")
        d = self.cost - self.AT @ y
        d[basic] = 0.0
        return y, d

    def solve(self, basis):
        """Run dual simplex from ``basis`` (which must be nonsingular)."""
        m, N = self.A.shape
        basic = np.array(basis.basic, dtype=int).copy()
        status = np.array(basis.status, dtype=np.int8).copy()
        if basic.shape != (m,) or status.shape != (N,):
            raise ValueError("basis has the wrong shape")
        status[basic] = BASIC
        lu = _factor(self.A, basic)

        pivots = 0
        bland = False
        best_obj = -np.inf
        stall = 0
        while True:
            y, d = self._duals(basic, lu)
            self._place_nonbasic(status, d)
            x = self._values(basic, status, lu)
            xb = x[basic]
            lo_b, up_b = self.lo[basic], self.up[basic]
            scale = 1.0 + np.abs(xb)
            infeas = np.maximum(lo_b - xb, xb - up_b)
            viol = infeas > self.ptol * scale
            if not viol.any():
                break
            if pivots >= self.max_pivots:
                raise NumericalStall(f"no optimal basis after {pivots} pivots")

            obj = float(self.cost @ x)
            if obj > best_obj + 1e-12 * (1.0 + abs(obj)):
                best_obj = obj
                stall = 0
            else:
                stall += 1
                if stall > 30:
                    bland = True

            cand = np.flatnonzero(viol)
            if bland:
                r = cand[np.argmin(basic[cand])]
            else:
                r = cand[np.argmax(infeas[cand])]
            to_lower = xb[r] < lo_b[r]

            e = np.zeros(m)
            e[r] = 1.0
            rho_r = lu.solve(e, trans="T")
            alpha = self.AT @ rho_r
            alpha[basic] = 0.0
            at_lo = status == AT_LOWER
            at_up = status == AT_UPPER
            movable = ~self.fixed
            if to_lower:
                elig = movable & ((at_lo & (alpha < -self.pivtol)) | (at_up & (alpha > self.pivtol)))
            else:
                elig = movable & ((at_lo & (alpha > self.pivtol)) | (at_up & (alpha < -self.pivtol)))
            js = np.flatnonzero(elig)
            if js.size == 0:
                raise Unbounded("dual unbounded: the LP has no feasible point")
            dj = np.abs(d[js])
            aj = np.abs(alpha[js])
            ratios = dj / aj
            if bland:
                tmin = ratios.min()
                ties = js[ratios <= tmin + 1e-12]
                q = int(ties.min())
            else:
                # Harris two-pass ratio test
                bound = ((dj + self.dtol) / aj).min()
                ok = ratios <= bound
                q = int(js[ok][np.argmax(aj[ok])])

            leaving = basic[r]
            basic[r] = q
            status[q] = BASIC
            status[leaving] = AT_LOWER if to_lower else AT_UPPER
            try:
                lu = _factor(self.A, basic)
            except _SingularBasis:
                raise NumericalStall("basis became singular during a pivot") from None
            pivots += 1

        tol_deg = 1e-11
        degenerate = bool(np.any(np.minimum(np.abs(xb - lo_b), np.abs(up_b - xb)) <= tol_deg))
        return SimplexResult(
            x=x,
            y=y,
            reduced_costs=d,
            objective=float(self.cost @ x),
            basis=Basis(basic, status),
            pivots=pivots,
            degenerate=degenerate,
        )
