"""Newton iteration on the KKT conditions with a guessed active set.

Given a primal-dual estimate and working sets ``L`` (variables held at their
lower bound) and ``U`` (held at their upper bound), one Newton step on

    p + A lam - mu - nu = 0,   c(x) = 0,   x_L = lb_L,   x_U = ub_U,
    mu = 0 off L,   nu = 0 off U,                      (A = Jacobian')

fixes the bound steps directly, solves a saddle system in the free
variables and multipliers, and recovers the bound multipliers from the
leftover stationarity residual.  A candidate that leaves a free variable
outside its box, or gives a bound multiplier the wrong sign, triggers a
change of working sets.  Such changes are solved as borders around the
factorization already computed for the step (see :mod:`.linalg`) instead of
refactoring.

Multipliers here are in problem scaling: the LP solver's ``lam`` times
``omega``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BorderSingular,
    FactorizationError,
    OverdeterminedActiveSet,
    RevisitedActiveSet,
    TweakBudgetExceeded,
)
from .linalg import AugmentedSystem, KktFactorization, solve_augmented

INTERIOR_TOL = 1e-9
SIGN_TOL = 1e-9

ACCEPT = "accept"
NEEDS_TWEAK = "needs_tweak"
INSUFFICIENT_DECREASE = "insufficient_decrease"


@dataclass
class PrimalDual:
    x: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def copy(self):
        return PrimalDual(self.x.copy(), self.lam.copy(), self.mu.copy(), self.nu.copy())


def kkt_vector(prob, pd):
    """Stacked ``(grad L; c)`` at ``pd``."""
    J = prob.jac(pd.x)
    g = prob.p + J.T @ pd.lam - pd.mu - pd.nu
    return np.concatenate([g, prob.c(pd.x)])


def kkt_norm(prob, pd):
    return float(np.abs(kkt_vector(prob, pd)).max(initial=0.0))


def set_key(L, U):
    return (tuple(sorted(L)), tuple(sorted(U)))


@dataclass
class AsState:
    iterate: PrimalDual
    lower: set
    upper: set
    tried: set = field(default_factory=set)
    tweak_count: int = 0
    kkt_history: list = field(default_factory=list)


class NewtonSystem:
    """Linearization at one iterate plus the factorized base saddle matrix.

    The base working sets ``(L0, U0)`` define the factorized matrix
    ``[[H_FF, A_F], [A_F', 0]]`` with ``F`` the free variables.  :meth:`step`
    accepts any other working sets and expresses the difference as a border.
    """

    def __init__(self, prob, pd, L0, U0):
        self.prob = prob
        self.pd = pd
        x = pd.x
        n = prob.n
        self.H = np.asarray(prob.hess(x, pd.lam).toarray(), dtype=float)
        J = prob.jac(x)
        self.A = np.asarray(J.T.toarray(), dtype=float)
        self.m = self.A.shape[1]
        self.g = prob.p + self.A @ pd.lam - pd.mu - pd.nu
        self.cval = np.asarray(prob.c(x), dtype=float)
        self.L0 = frozenset(L0)
        self.U0 = frozenset(U0)
        active0 = self.L0 | self.U0
        self.F0 = np.array(sorted(set(range(n)) - active0), dtype=int)
        self.A0 = np.array(sorted(active0), dtype=int)
        self.pos = {int(i): k for k, i in enumerate(self.F0)}
        self.a0 = np.zeros(n)
        for i in self.L0:
            self.a0[i] = prob.lb[i] - x[i]
        for i in self.U0:
            self.a0[i] = prob.ub[i] - x[i]
        nf = len(self.F0)
        K = np.zeros((nf + self.m, nf + self.m))
        K[:nf, :nf] = self.H[np.ix_(self.F0, self.F0)]
        K[:nf, nf:] = self.A[self.F0]
        K[nf:, :nf] = self.A[self.F0].T
        self.base = KktFactorization(K)
        # right-hand side with every base-active step already substituted
        Ha = self.H[:, self.A0] @ self.a0[self.A0]
        self.rowrhs = -(self.g + pd.mu + pd.nu) - Ha
        self.b1 = np.concatenate([self.rowrhs[self.F0], -self.cval - self.A[self.A0].T @ self.a0[self.A0]])
        self.cache = {}

    def changes(self, L, U):
        """Border entries (index, case) turning the base sets into ``(L, U)``.

        Cases: ``a`` free -> lower, ``b`` free -> upper, ``c`` bound -> free,
        ``d`` upper -> lower, ``e`` lower -> upper.
        """
        out = []
        for i in sorted(set(L) | set(U) | self.L0 | self.U0):
            was = "L" if i in self.L0 else "U" if i in self.U0 else "F"
            now = "L" if i in L else "U" if i in U else "F"
            if was == now:
                continue
            case = {("F", "L"): "a", ("F", "U"): "b", ("L", "F"): "c", ("U", "F"): "c",
                    ("U", "L"): "d", ("L", "U"): "e"}[(was, now)]
            out.append((i, case))
        return out

    def border(self, L, U):
        prob, x = self.prob, self.pd.x
        ch = self.changes(L, U)
        nf = len(self.F0)
        N = nf + self.m
        w = len(ch)
        V = np.zeros((N, w))
        X = np.zeros((w, N))
        S = np.zeros((w, w))
        b2 = np.zeros(w)
        keys = []
        coupled = [k for k, (_, case) in enumerate(ch) if case in "cde"]
        for k, (i, case) in enumerate(ch):
            if case in "ab":
                j = self.pos[i]
                V[j, k] = 1.0
                X[k, j] = 1.0
                bound = prob.lb[i] if case == "a" else prob.ub[i]
                b2[k] = bound - x[i]
                keys.append(("unit", i))
            else:
                V[:nf, k] = self.H[self.F0, i]
                V[nf:, k] = self.A[i]
                keys.append(("col", i))
                if case == "c":
                    X[k, :nf] = self.H[i, self.F0]
                    X[k, nf:] = self.A[i]
                    for kk in coupled:
                        S[k, kk] = self.H[i, ch[kk][0]]
                    b2[k] = self.rowrhs[i]
                else:
                    S[k, k] = 1.0
                    new = prob.lb[i] if case == "d" else prob.ub[i]
                    b2[k] = (new - x[i]) - self.a0[i]
        return ch, AugmentedSystem(self.base, V, X, S, keys=keys, cache=self.cache), b2

    def step(self, L, U):
        """Newton candidate for working sets ``(L, U)``; raises BorderSingular."""
        prob, pd = self.prob, self.pd
        n = prob.n
        nf = len(self.F0)
        ch, aug, b2 = self.border(L, U)
        z, t = solve_augmented(aug, self.b1, b2)
        dx = self.a0.copy()
        dx[self.F0] = z[:nf]
        dlam = z[nf:]
        for k, (i, case) in enumerate(ch):
            if case in "cde":
                dx[i] = self.a0[i] + t[k]
        # bound multipliers from the stationarity rows of the bound variables
        r = self.H @ dx + self.A @ dlam + self.g
        mu = np.zeros(n)
        nu = np.zeros(n)
        Li = np.fromiter(L, dtype=int, count=len(L))
        Ui = np.fromiter(U, dtype=int, count=len(U))
        mu[Li] = pd.mu[Li] + pd.nu[Li] + r[Li]
        nu[Ui] = pd.mu[Ui] + pd.nu[Ui] + r[Ui]
        x_new = pd.x + dx
        # land exactly on the bounds of the working sets
        x_new[Li] = prob.lb[Li]
        x_new[Ui] = prob.ub[Ui]
        return PrimalDual(x_new, pd.lam + dlam, mu, nu), ch


def newton_step(prob, state):
    """Candidate from a fresh factorization for ``state``'s working sets."""
    sysm = NewtonSystem(prob, state.iterate, state.lower, state.upper)
    return sysm.step(state.lower, state.upper)[0]


@dataclass
class CandidateCheck:
    kind: str
    violations: list
    norm: float


def violations(prob, L, U, cand):
    out = []
    x = cand.x
    fixed = prob.lb == prob.ub
    for i in range(prob.n):
        if i in L:
            if cand.mu[i] < -SIGN_TOL and not fixed[i]:
                out.append((i, "mu_negative"))
        elif i in U:
            if cand.nu[i] > SIGN_TOL:
                out.append((i, "nu_positive"))
        else:
            if x[i] <= prob.lb[i] + INTERIOR_TOL:
                out.append((i, "below_lower"))
            elif x[i] >= prob.ub[i] - INTERIOR_TOL:
                out.append((i, "above_upper"))
    return out


def check_candidate(prob, L, U, cand, current_norm):
    """Accept, request a tweak, or report insufficient decrease."""
    v = violations(prob, L, U, cand)
    if v:
        return CandidateCheck(NEEDS_TWEAK, v, np.nan)
    nrm = kkt_norm(prob, cand)
    if nrm <= 0.5 * current_norm:
        return CandidateCheck(ACCEPT, [], nrm)
    return CandidateCheck(INSUFFICIENT_DECREASE, [], nrm)


def tweak(state, viol, n, m, T):
    """Apply the repair rules to ``state``'s working sets in place.

    Raises :class:`TweakBudgetExceeded`, :class:`RevisitedActiveSet` or
    :class:`OverdeterminedActiveSet` when the session must give up.
    """
    if not viol:
        raise ValueError("tweak needs at least one violation")
    state.tweak_count += 1
    if state.tweak_count > T:
        raise TweakBudgetExceeded(f"more than {T} tweaks")
    L, U = set(state.lower), set(state.upper)
    for i, kind in viol:
        if kind == "below_lower":
            L.add(i)
        elif kind == "above_upper":
            U.add(i)
        elif kind == "mu_negative":
            L.discard(i)
        elif kind == "nu_positive":
            U.discard(i)
    key = set_key(L, U)
    if key in state.tried:
        raise RevisitedActiveSet("working sets already tried in this step")
    if len(L) + len(U) > n - m:
        raise OverdeterminedActiveSet(f"{len(L) + len(U)} active bounds exceed n - m = {n - m}")
    state.tried.add(key)
    state.lower, state.upper = L, U
    return L, U


@dataclass
class AsOutcome:
    success: bool
    pd: PrimalDual | None
    lower: set
    upper: set
    iterations: int
    tweaks: int
    reason: str | None
    events: list
    kkt_history: list

    def summary(self):
        return {
            "success": self.success,
            "iterations": self.iterations,
            "tweaks": self.tweaks,
            "reason": self.reason,
            "kkt": self.kkt_history,
        }


def run_active_set(prob, start, lower, upper, T=10, tol=1e-6, max_steps=50):
    """Run the heuristic from ``start``; see :class:`AsOutcome`.

    Every Newton step factors the saddle matrix once; tweaks within the step
    reuse it.  ``reason`` on failure is one of ``budget``, ``revisit``,
    ``overdetermined``, ``insufficient_decrease`` or ``singular``.
    """
    n = prob.n
    cur = start.copy()
    L, U = set(lower), set(upper)
    norm = kkt_norm(prob, cur)
    history = [norm]
    events = []
    its = 0
    tweaks = 0

    def fail(reason):
        events.append({"event": "fail", "reason": reason})
        return AsOutcome(False, None, L, U, its, tweaks, reason, events, history)

    m = len(cur.lam)
    if len(L) + len(U) > n - m:
        return fail("overdetermined")
    if norm <= tol:
        return AsOutcome(True, cur, L, U, 0, 0, None, events, history)
    while its < max_steps:
        try:
            sysm = NewtonSystem(prob, cur, L, U)
        except FactorizationError:
            return fail("singular")
        state = AsState(cur, set(L), set(U), tried={set_key(L, U)})
        while True:
            try:
                cand, ch = sysm.step(state.lower, state.upper)
            except BorderSingular:
                tweaks += state.tweak_count
                return fail("singular")
            chk = check_candidate(prob, state.lower, state.upper, cand, norm)
            if chk.kind != NEEDS_TWEAK:
                break
            events.append({"event": "tweak", "step": its, "violations": [(int(i), k) for i, k in chk.violations]})
            try:
                tweak(state, chk.violations, n, m, T)
            except (TweakBudgetExceeded, RevisitedActiveSet, OverdeterminedActiveSet) as exc:
                tweaks += state.tweak_count - (1 if isinstance(exc, TweakBudgetExceeded) else 0)
                L, U = state.lower, state.upper
                return fail(exc.reason)
        tweaks += state.tweak_count
        L, U = state.lower, state.upper
        if chk.kind == INSUFFICIENT_DECREASE:
            history.append(chk.norm)
            return fail("insufficient_decrease")
        cur = cand
        norm = chk.norm
        history.append(norm)
        its += 1
        events.append({"event": "step", "step": its, "kkt": norm, "border": [(int(i), c) for i, c in ch]})
        if norm <= tol:
            return AsOutcome(True, cur, L, U, its, tweaks, None, events, history)
    return fail("insufficient_decrease")
