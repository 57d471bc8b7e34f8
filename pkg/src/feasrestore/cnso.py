"""l1 penalty function, its linearized model, and bound-activity bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NegativeExpectedReduction, OutOfBox

BOX_TOL = 1e-9
ACTIVITY_TOL = 1e-9


@dataclass(frozen=True)
class PenaltyEval:
    phi: float
    c_val: np.ndarray
    linear_part: float


def penalty(prob, x, tol=BOX_TOL):
    """``phi(x) = p'x + omega * ||c(x)||_1`` for a box-feasible ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != prob.p.shape:
        raise DimensionMismatch(f"x has shape {x.shape}, expected {prob.p.shape}")
    if np.any(x < prob.lb - tol) or np.any(x > prob.ub + tol):
        raise OutOfBox("point violates the bound constraints")
    cv = np.asarray(prob.c(x), dtype=float)
    lin = float(prob.p @ x)
    return PenaltyEval(lin + prob.omega * float(np.abs(cv).sum()), cv, lin)


def model(prob, x_k, jac_k, c_k, d):
    """Linearized penalty ``p'(x_k + d) + omega * ||c_k + J_k d||_1``."""
    d = np.asarray(d, dtype=float)
    if d.shape != prob.p.shape:
        raise DimensionMismatch(f"step has shape {d.shape}, expected {prob.p.shape}")
    return float(prob.p @ (x_k + d) + prob.omega * np.abs(c_k + jac_k @ d).sum())


def agreement(prob, x_k, d_k, model_val, phi_k=None, phi_new=None):
    """Actual and predicted reductions and their ratio.

    ``phi_k`` and ``phi_new`` may be supplied to avoid re-evaluating ``c``.
    When the predicted reduction is exactly zero the ratio is ``+inf``
    (a zero step cannot be rejected).
    """
    if phi_k is None:
        phi_k = penalty(prob, x_k).phi
    if phi_new is None:
        phi_new = penalty(prob, np.asarray(x_k) + d_k).phi
    dphi = phi_k - phi_new
    dm = phi_k - model_val
    if dm < -1e-12 * max(1.0, abs(phi_k)):
        raise NegativeExpectedReduction(f"predicted reduction {dm:.3e} is negative")
    dm = max(dm, 0.0)
    if dm == 0.0:
        rho = np.inf if dphi >= 0 else -np.inf
    else:
        rho = dphi / dm
    return dphi, dm, rho


@dataclass(frozen=True)
class ActiveSets:
    lower: frozenset
    upper: frozenset
    inactive: frozenset

    def key(self):
        return (tuple(sorted(self.lower)), tuple(sorted(self.upper)))

    def __len__(self):
        return len(self.lower) + len(self.upper)

    def symmetric_difference(self, other):
        return len(self.lower ^ other.lower) + len(self.upper ^ other.upper)


def active_sets(prob, x, tol=ACTIVITY_TOL):
    x = np.asarray(x, dtype=float)
    lower = np.flatnonzero(np.abs(x - prob.lb) <= tol)
    upper = np.flatnonzero(np.abs(x - prob.ub) <= tol)
    # a fixed variable (lb == ub) is reported as lower-active only
    if len(lower) and len(upper):
        upper = np.setdiff1d(upper, lower)
    both = set(lower.tolist()) | set(upper.tolist())
    inactive = frozenset(range(len(x))) - both
    return ActiveSets(frozenset(lower.tolist()), frozenset(upper.tolist()), inactive)
