"""Generic problem container: min p'x  s.t.  c(x) = 0,  lb <= x <= ub."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp


@dataclass
class GnoProblem:
    """Linear objective, smooth equality residual and box bounds.

    ``c(x)`` returns the residual vector, ``jac(x)`` a sparse ``m x n``
    Jacobian and ``hess(x, lam)`` the sparse ``n x n`` matrix
    ``sum_i lam_i * Hessian(c_i)``.  ``omega`` is the l1 penalty weight used
    by the trust-region solver.  ``crash_columns`` optionally names ``m``
    columns whose Jacobian block is expected to be square and nonsingular;
    the LP solver starts from that basis when no warm start exists.
    """

    p: np.ndarray
    c: Callable
    jac: Callable
    hess: Callable
    lb: np.ndarray
    ub: np.ndarray
    omega: float
    x0: np.ndarray
    layout: dict = field(default_factory=dict)
    known_best: float | None = None
    crash_columns: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.x0 = np.asarray(self.x0, dtype=float)
        n = len(self.p)
        if not (self.lb.shape == self.ub.shape == self.x0.shape == (n,)):
            raise ValueError("p, lb, ub and x0 must all have the same length")
        if np.any(self.lb > self.ub):
            raise ValueError("lb must not exceed ub")
        if not self.omega > 0:
            raise ValueError("penalty weight omega must be positive")

    @property
    def n(self):
        return len(self.p)

    @property
    def m(self):
        return len(self.c(self.x0))

    def n_bound_faces(self):
        """Number of finite bound constraints (each finite lb/ub counts once)."""
        return int(np.isfinite(self.lb).sum() + np.isfinite(self.ub).sum())


def linear_problem(p, A, b, lb, ub, omega, x0=None):
    """Problem with affine residual ``c(x) = A x - b`` (handy for tests)."""
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if x0 is None:
        x0 = np.clip(np.zeros(n), lb, ub)
    return GnoProblem(
        p=p,
        c=lambda x: A @ x - b,
        jac=lambda x: A,
        hess=lambda x, lam: sp.csr_matrix((n, n)),
        lb=lb,
        ub=ub,
        omega=omega,
        x0=x0,
    )
