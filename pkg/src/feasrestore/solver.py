"""Trust-region sequential l1 linear programming with an optional Newton
active-set accelerator.

Each outer iteration linearizes ``c`` at ``x_k``, solves the LP subproblem in
an infinity-norm box of radius ``delta``, and accepts the step when the
actual reduction of the penalty function is at least ``rho_lo`` times the
reduction the linear model predicted.  Once the bound-active set stops
moving the solver may hand the iterate and LP multipliers to the Newton
active-set heuristic; if that fails, iterations resume where they stopped.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import activeset
from .cnso import active_sets, agreement, model, penalty
from .errors import InsufficientTrace
from .lp import LpSubproblem, extract_multipliers, solve_subproblem

OPTIMAL = "Optimal"
ZERO_OBJECTIVE = "ZeroObjective"
FLAT_REGION = "FlatRegion"
TRUST_RADIUS_COLLAPSE = "TrustRadiusCollapse"
MAX_ITERATIONS = "MaxIterations"
CONVERGED = (OPTIMAL, ZERO_OBJECTIVE, FLAT_REGION)


@dataclass(frozen=True)
class SlpConfig:
    rho_lo: float = 0.1
    eta_lo: float = 0.25
    eta_hi: float = 0.75
    c1: float = 2.0
    c2: float = 0.5
    delta0: float = 1.0
    delta_max: float = 1.0
    delta_min: float = 1e-5
    epsilon: float = 1e-3
    max_iter: int = 200
    as_enabled: bool = True
    as_trigger_threshold: int = 10
    as_min_accepted: int = 2
    T: int = 10
    as_tol: float = 1e-6
    feas_tol: float = 1e-9
    certify_tol: float = 1e-6
    known_best: float | None = None
    keep_iterates: bool = True
    seed: int | None = None  # reserved; the method is deterministic

    def __post_init__(self):
        if not 0 < self.rho_lo < self.eta_lo < 0.5 < self.eta_hi < 1:
            raise ValueError("need 0 < rho_lo < eta_lo < 0.5 < eta_hi < 1")
        if not 0 < self.c2 < 1 < self.c1:
            raise ValueError("need 0 < c2 < 1 < c1")
        if not 0 < self.delta0 <= self.delta_max:
            raise ValueError("need 0 < delta0 <= delta_max")
        if not (self.delta_min > 0 and self.epsilon > 0 and self.max_iter >= 1 and self.T >= 0):
            raise ValueError("delta_min, epsilon must be positive; max_iter >= 1; T >= 0")


@dataclass
class IterRecord:
    k: int
    delta: float
    phi: float
    pred: float
    actual: float
    rho: float
    pivots: int
    accepted: bool
    step_inf: float
    active_change: int | None = None
    as_event: dict | None = None


@dataclass
class SolveReport:
    status: str
    x: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    phi: float
    objective: float
    iterations: int
    pivots: int
    as_iterations: int
    as_tweaks: int
    as_invocations: int
    wall_time: float
    trace: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    kkt: dict = field(default_factory=dict)
    free_dimension: int | None = None

    @property
    def converged(self):
        return self.status in CONVERGED

    def summary(self):
        as_part = f"{self.as_iterations}({self.as_tweaks})" if self.as_iterations else "-"
        return f"{self.iterations}({self.pivots}) / AS {as_part}"

    def trace_jsonl(self):
        return "".join(record_json(rec) + "\n" for rec in self.trace)


def record_json(rec):
    """One trace record as a JSON object (non-finite floats become strings)."""
    d = asdict(rec)
    for key in ("rho", "phi", "pred", "actual"):
        if not np.isfinite(d[key]):
            d[key] = str(d[key])
    return json.dumps(d)


def kkt_certificate(prob, x, lam, mu, nu):
    """Residuals of the first-order conditions in penalty (LP) scaling.

    ``lam`` is scaled so that it must lie in ``[-1, 1]``; stationarity reads
    ``p + omega J'lam - mu - nu = 0``.
    """
    J = prob.jac(x)
    cv = prob.c(x)
    stat = prob.p + prob.omega * (J.T @ lam) - mu - nu
    gap_lo = np.where(np.isfinite(prob.lb), x - prob.lb, 0.0)
    gap_up = np.where(np.isfinite(prob.ub), prob.ub - x, 0.0)
    return {
        "stationarity": float(np.abs(stat).max(initial=0.0)),
        "feasibility": float(np.abs(cv).max(initial=0.0)),
        "box": float(max(np.max(prob.lb - x, initial=0.0), np.max(x - prob.ub, initial=0.0), 0.0)),
        "lambda_excess": float(max(np.abs(lam).max(initial=0.0) - 1.0, 0.0)),
        "mu_negative": float(max(-mu.min(initial=0.0), 0.0)),
        "nu_positive": float(max(nu.max(initial=0.0), 0.0)),
        "complementarity": float(max(np.abs(mu * gap_lo).max(initial=0.0),
                                     np.abs(nu * gap_up).max(initial=0.0))),
    }


def certified(cert, tol):
    return all(v <= tol for v in cert.values())


def _multipliers_at(prob, x, c_val, delta, basis):
    """LP multipliers at ``x`` (one extra subproblem, no step taken)."""
    J = prob.jac(x)
    sub = LpSubproblem.at(prob, x, c_val, J, delta)
    sol = solve_subproblem(sub, warm=basis, crash_columns=prob.crash_columns)
    sets = active_sets(prob, x + sol.d)
    return extract_multipliers(sol, sets)


def solve(prob, cfg=None, log=None):
    """Run the trust-region method on ``prob`` and return a :class:`SolveReport`.

    ``log``, when given, is called with each :class:`IterRecord` once the
    iteration (including any active-set attempt) has finished.
    """
    cfg = SlpConfig() if cfg is None else cfg
    best = cfg.known_best if cfg.known_best is not None else prob.known_best
    t0 = time.perf_counter()
    n = prob.n
    x = np.clip(prob.x0.copy(), prob.lb, prob.ub)
    ev = penalty(prob, x)
    m = len(ev.c_val)
    delta = cfg.delta0
    basis = None
    trace = []
    iterates = [x.copy()] if cfg.keep_iterates else []
    pivots = 0
    as_its = as_tweaks = as_calls = 0
    accepted_count = 0
    prev_sets = active_sets(prob, x)
    lam = np.zeros(m)
    mu = np.zeros(n)
    nu = np.zeros(n)
    status = None
    k = 0

    def at_best(ev_):
        return (best is not None and ev_.linear_part <= best + cfg.feas_tol
                and np.abs(ev_.c_val).max(initial=0.0) <= cfg.feas_tol)

    if at_best(ev):
        status = ZERO_OBJECTIVE

    def flush():
        # records are emitted one iteration late so an active-set event is included
        while log is not None and logged[0] < len(trace):
            log(trace[logged[0]])
            logged[0] += 1

    logged = [0]
    while status is None:
        flush()
        if k >= cfg.max_iter:
            status = MAX_ITERATIONS
            break
        J = prob.jac(x)
        sub = LpSubproblem.at(prob, x, ev.c_val, J, delta)
        sol = solve_subproblem(sub, warm=basis, crash_columns=prob.crash_columns)
        basis = sol.basis
        pivots += sol.pivots
        mval = model(prob, x, J, ev.c_val, sol.d)
        x_try = np.clip(x + sol.d, prob.lb, prob.ub)
        ev_try = penalty(prob, x_try)
        dphi, dm, rho = agreement(prob, x, sol.d, mval, phi_k=ev.phi, phi_new=ev_try.phi)
        accepted = rho >= cfg.rho_lo
        rec = IterRecord(k, delta, ev.phi, dm, dphi, float(rho), sol.pivots, bool(accepted),
                         float(np.abs(sol.d).max(initial=0.0)))
        delta_k = delta
        if rho < cfg.eta_lo:
            delta = cfg.c2 * delta
        elif rho > cfg.eta_hi:
            delta = min(cfg.c1 * delta, cfg.delta_max)
        k += 1

        if accepted:
            x, ev = x_try, ev_try
            accepted_count += 1
            if cfg.keep_iterates:
                iterates.append(x.copy())
            sets = active_sets(prob, x)
            lam, mu, nu = extract_multipliers(sol, sets)
            rec.active_change = prev_sets.symmetric_difference(sets)
        trace.append(rec)

        if accepted and at_best(ev):
            status = ZERO_OBJECTIVE
            break
        if dm / delta_k <= cfg.epsilon:
            status = FLAT_REGION
            break
        if delta < cfg.delta_min:
            status = TRUST_RADIUS_COLLAPSE
            break

        if not (accepted and cfg.as_enabled):
            if accepted:
                prev_sets = sets
            continue
        change = rec.active_change
        free_dim = n - m - len(sets)
        trigger = (accepted_count >= cfg.as_min_accepted
                   and change < cfg.as_trigger_threshold
                   and free_dim > 0)
        prev_sets = sets
        if not trigger:
            continue
        as_calls += 1
        start = activeset.PrimalDual(x.copy(), prob.omega * lam, mu.copy(), nu.copy())
        outcome = activeset.run_active_set(prob, start, sets.lower, sets.upper, T=cfg.T, tol=cfg.as_tol)
        as_its += outcome.iterations
        as_tweaks += outcome.tweaks
        rec.as_event = outcome.summary()
        if outcome.success:
            pd = outcome.pd
            x = pd.x
            lam = pd.lam / prob.omega
            mu, nu = pd.mu, pd.nu
            ev = penalty(prob, x)
            if cfg.keep_iterates:
                iterates.append(x.copy())
            status = OPTIMAL
            break

    flush()
    sets = active_sets(prob, x)
    if status in (FLAT_REGION, ZERO_OBJECTIVE):
        lam, mu, nu = _multipliers_at(prob, x, ev.c_val, max(delta, cfg.delta_min), basis)
    cert = kkt_certificate(prob, x, lam, mu, nu)
    if status == FLAT_REGION and certified(cert, cfg.certify_tol):
        status = OPTIMAL
    return SolveReport(
        status=status,
        x=x,
        lam=lam,
        mu=mu,
        nu=nu,
        phi=ev.phi,
        objective=ev.linear_part,
        iterations=k,
        pivots=pivots,
        as_iterations=as_its,
        as_tweaks=as_tweaks,
        as_invocations=as_calls,
        wall_time=time.perf_counter() - t0,
        trace=trace,
        iterates=iterates,
        kkt=cert,
        free_dimension=n - m - len(sets),
    )


def convergence_rate_probe(errors=None, *, iterates=None, x_star=None, floor=1e-13):
    """Classify the local rate of a converging sequence.

    Pass either the error sequence ``errors`` or ``iterates`` together with
    the limit ``x_star``.  Errors below ``floor`` (relative to the scale of
    ``x_star``) are dropped as roundoff.  Fits ``log e_{k+1}`` against
    ``log e_k`` over the last three ratios: slope at least 1.7 is quadratic,
    a steady contraction is linear, anything else has stalled.
    """
    if errors is None:
        if iterates is None or x_star is None:
            raise InsufficientTrace("need errors or iterates with x_star")
        x_star = np.asarray(x_star, dtype=float)
        errors = [float(np.abs(np.asarray(xk) - x_star).max()) for xk in iterates]
        scale = max(1.0, float(np.abs(x_star).max(initial=0.0)))
    else:
        scale = 1.0
    e = np.asarray(errors, dtype=float)
    e = e[e > floor * scale]
    if len(e) < 4:
        raise InsufficientTrace(f"need at least 4 nonzero errors, got {len(e)}")
    tail = np.log(e[-4:])
    xs, ys = tail[:-1], tail[1:]
    if np.ptp(xs) == 0:
        return "stalled"
    slope = np.polyfit(xs, ys, 1)[0]
    if slope >= 1.7:
        return "quadratic"
    ratios = e[-3:] / e[-4:-1]
    if np.all(ratios < 0.95):
        return "linear"
    return "stalled"
