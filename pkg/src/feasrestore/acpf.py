"""Reduced AC power-flow residual, its derivatives, and a Newton solver.

The reduced unknowns are the voltage magnitudes on demand buses and the
angles on generator and demand buses, stacked as ``[V_D, theta_G, theta_D]``.
Residual rows are ``[P over G, P over D, Q over D]``; the slack bus and the
generator voltage magnitudes stay fixed at their network values.
"""

from __future__ import annotations

import warnings
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, MaxIterations, SingularJacobian
from .network import complex_power_injection


@dataclass
class PfState:
    V_D: np.ndarray
    theta_GD: np.ndarray

    @classmethod
    def from_network(cls, net):
        pvpq = np.concatenate([net.gens, net.demands])
        return cls(net.V0[net.demands].copy(), net.theta0[pvpq].copy())

    @classmethod
    def from_vector(cls, net, x):
        nd = len(net.demands)
        x = np.asarray(x, dtype=float)
        if x.shape != (state_size(net),):
            raise DimensionMismatch(f"state vector must have length {state_size(net)}")
        return cls(x[:nd].copy(), x[nd:].copy())

    @property
    def vector(self):
        return np.concatenate([self.V_D, self.theta_GD])


def state_size(net):
    return 2 * len(net.demands) + len(net.gens)


def _as_vector(net, state):
    x = state.vector if isinstance(state, PfState) else np.asarray(state, dtype=float)
    if x.shape != (state_size(net),):
        raise DimensionMismatch(f"state vector must have length {state_size(net)}, got {x.shape}")
    return x


def full_voltages(net, state):
    """Expand a reduced state to full-length (V, theta) vectors."""
    x = _as_vector(net, state)
    nd = len(net.demands)
    V = net.V0.copy()
    theta = net.theta0.copy()
    V[net.demands] = x[:nd]
    theta[np.concatenate([net.gens, net.demands])] = x[nd:]
    return V, theta


def residual(net, state, P=None, Q=None):
    """Mismatch ``injection - scheduled`` stacked as [P_G, P_D, Q_D]."""
    P = net.P if P is None else P
    Q = net.Q if Q is None else Q
    V, theta = full_voltages(net, state)
    Pinj, Qinj = complex_power_injection(net, V, theta)
    return np.concatenate([
        Pinj[net.gens] - P[net.gens],
        Pinj[net.demands] - P[net.demands],
        Qinj[net.demands] - Q[net.demands],
    ])


class _JacobianPattern:
    """Sparsity of the reduced Jacobian, computed once per network.

    Every stored admittance entry ``(i, k)`` (plus each diagonal) feeds up to
    four Jacobian entries: real/imaginary parts of the magnitude and angle
    partials.  ``perm`` puts those values into CSC order.
    """

    def __init__(self, net):
        n = net.n_bus
        Y = (net.Ybus + sp.identity(n, format="csr")).tocoo()
        Y0 = net.Ybus.tocsr()
        i, k = Y.row.astype(int), Y.col.astype(int)
        self.i, self.k = i, k
        self.y = np.asarray(Y0[i, k]).ravel()
        self.diag = i == k
        ng, nd = len(net.gens), len(net.demands)
        pvpq = np.concatenate([net.gens, net.demands])
        rowP = np.full(n, -1)
        rowP[pvpq] = np.arange(ng + nd)
        rowQ = np.full(n, -1)
        rowQ[net.demands] = ng + nd + np.arange(nd)
        colV = np.full(n, -1)
        colV[net.demands] = np.arange(nd)
        colA = np.full(n, -1)
        colA[pvpq] = nd + np.arange(ng + nd)
        # (entry mask, row map, column map) for Re dVm, Re dVa, Im dVm, Im dVa
        blocks = [(rowP, colV), (rowP, colA), (rowQ, colV), (rowQ, colA)]
        self.sel = []
        rows, cols = [], []
        for rmap, cmap in blocks:
            keep = (rmap[i] >= 0) & (cmap[k] >= 0)
            self.sel.append(keep)
            rows.append(rmap[i[keep]])
            cols.append(cmap[k[keep]])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        self.perm = np.lexsort((rows, cols))
        self.indices = rows[self.perm]
        m = state_size(net)
        self.indptr = np.searchsorted(cols[self.perm], np.arange(m + 1))
        self.shape = (m, m)


_patterns = weakref.WeakKeyDictionary()


def _pattern(net):
    pat = _patterns.get(net)
    if pat is None:
        pat = _patterns[net] = _JacobianPattern(net)
    return pat


def jacobian(net, state):
    """Sparse Jacobian of :func:`residual` w.r.t. ``[V_D, theta_G, theta_D]``."""
    V, theta = full_voltages(net, state)
    Vc = V * np.exp(1j * theta)
    pat = _pattern(net)
    I = net.Ybus @ Vc
    i, k, y = pat.i, pat.k, pat.y
    Vi = Vc[i]
    # polar partials of S_i = V_i conj(I_i), entry by entry
    dVa = 1j * Vi * np.conj(-y * Vc[k])
    dVm = Vi * np.conj(y * Vc[k] / V[k])
    d = pat.diag
    dVa[d] += 1j * Vi[d] * np.conj(I[i[d]])
    dVm[d] += np.conj(I[i[d]]) * Vi[d] / V[i[d]]
    s = pat.sel
    data = np.concatenate([dVm.real[s[0]], dVa.real[s[1]], dVm.imag[s[2]], dVa.imag[s[3]]])
    return sp.csc_matrix((data[pat.perm], pat.indices, pat.indptr), shape=pat.shape)


def _d2S(Ybus, Vc, lam):
    """Second derivatives of ``lam^T S(V)`` in polar coordinates.

    Returns complex blocks (aa, av, va, vv) over all buses; callers take the
    real part for active-power multipliers and imaginary part for reactive.
    """
    n = len(Vc)
    Ibus = Ybus @ Vc
    diaglam = sp.diags(lam)
    diagV = sp.diags(Vc)
    A = sp.diags(lam * Vc)
    B = Ybus @ diagV
    C = A @ np.conj(B)
    D = Ybus.conj().T @ diagV
    E = sp.diags(np.conj(Vc)) @ (D @ diaglam - sp.diags(D @ lam))
    F = C - A @ sp.diags(np.conj(Ibus))
    G = sp.diags(np.ones(n) / np.abs(Vc))
    Gaa = E + F
    Gva = 1j * G @ (E - F)
    Gav = Gva.T
    Gvv = G @ (C + C.T) @ G
    return Gaa, Gav, Gva, Gvv


def lagrangian_hessian(net, state, lam):
    """``sum_i lam_i * Hessian(residual_i)`` as a symmetric sparse matrix."""
    m = state_size(net)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (m,):
        raise DimensionMismatch(f"multiplier vector must have length {m}")
    V, theta = full_voltages(net, state)
    Vc = V * np.exp(1j * theta)
    n = net.n_bus
    ng = len(net.gens)
    nd = len(net.demands)
    pvpq = np.concatenate([net.gens, net.demands])
    pq = net.demands
    lamP = np.zeros(n)
    lamQ = np.zeros(n)
    lamP[pvpq] = lam[: ng + nd]
    lamQ[pq] = lam[ng + nd:]
    Paa, Pav, Pva, Pvv = _d2S(net.Ybus, Vc, lamP.astype(complex))
    Qaa, Qav, Qva, Qvv = _d2S(net.Ybus, Vc, lamQ.astype(complex))
    Haa = (Paa.real + Qaa.imag).tocsr()
    Hav = (Pav.real + Qav.imag).tocsr()
    Hva = (Pva.real + Qva.imag).tocsr()
    Hvv = (Pvv.real + Qvv.imag).tocsr()
    # variable order: [Vm on pq, Va on pvpq]
    H = sp.bmat([
        [Hvv[pq][:, pq], Hva[pq][:, pvpq]],
        [Hav[pvpq][:, pq], Haa[pvpq][:, pvpq]],
    ], format="csr")
    return ((H + H.T) * 0.5).tocsc()


@dataclass
class PfSolution:
    state: PfState
    iterations: int
    history: list

    @property
    def mismatch(self):
        return self.history[-1]


def newton_solve(net, x0=None, tol=1e-8, max_iter=10):
    """Plain (undamped) Newton on the reduced power-flow equations.

    Raises :class:`SingularJacobian` or :class:`MaxIterations`; both carry the
    per-iteration mismatch history.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = (PfState.from_network(net) if x0 is None else x0).vector.copy()
    F = residual(net, x)
    history = [float(np.max(np.abs(F), initial=0.0))]
    it = 0
    while history[-1] > tol:
        if it >= max_iter or not np.isfinite(history[-1]):
            raise MaxIterations(history, PfState.from_vector(net, x))
        J = jacobian(net, x)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                dx = spla.splu(J).solve(-F)
        except (RuntimeError, spla.MatrixRankWarning, RuntimeWarning):
            raise SingularJacobian(history, PfState.from_vector(net, x)) from None
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian(history, PfState.from_vector(net, x))
        x = x + dx
        it += 1
        F = residual(net, x)
        history.append(float(np.max(np.abs(F), initial=0.0)))
    return PfSolution(PfState.from_vector(net, x), it, history)


def is_solvable(net, tol=1e-8, max_iter=10):
    """Whether Newton from the case-file start converges (the screening test)."""
    try:
        newton_solve(net, tol=tol, max_iter=max_iter)
    except (SingularJacobian, MaxIterations):
        return False
    return True
