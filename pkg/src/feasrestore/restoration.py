"""Minimum load-shedding restoration problem and decoding of its solution.

Unknowns are stacked as ``[V_D, theta_G, theta_D, sigma+, sigma-, rho]``:
voltage magnitudes and angles from the reduced power flow, symmetric
generation adjustments ``sigma+/-`` on generator buses with positive net
injection, and a shed fraction ``rho`` on demand buses carrying both active
and reactive load.  The residual is the power-flow mismatch with the
scheduled injections relaxed by those fractions:

    P_i(V, theta) - P_i - |P_i| (sigma+_i - sigma-_i)     i in G
    P_i(V, theta) - P_i - |P_i| rho_i                      i in D
    Q_i(V, theta) - Q_i - |Q_i| rho_i                      i in D

Shedding a fraction ``rho`` of a load moves its (negative) injection toward
zero, which is why the relaxation enters with a minus sign on the positive
magnitude.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import acpf
from .problem import GnoProblem

ACTIVITY_TOL = 1e-9


def _retained(net):
    """Buses that receive a relaxation variable.

    Generator buses get ``sigma+/-`` only when their net active injection is
    positive, and demand buses get ``rho`` only when they carry both positive
    active and positive reactive load.  Other buses would have a zero or
    sign-inconsistent objective weight.
    """
    P = net.P
    sig = net.gens[P[net.gens] > 0]
    rho = net.demands[(net.Pd[net.demands] > 0) & (net.Qd[net.demands] > 0)]
    return sig, rho


def restoration_omega(net):
    """Penalty weight: ten times the largest scheduled injection, at least 10."""
    P = np.abs(net.P[np.concatenate([net.demands, net.gens])])
    Q = np.abs(net.Q[net.demands])
    big = max(P.max(initial=0.0), Q.max(initial=0.0))
    return max(10.0 * big, 10.0)


def build_restoration(net, vmin=0.94, vmax=1.06, sigma_caps=1.0, rho_caps=1.0, omega=None):
    """Assemble the restoration problem for ``net`` as a :class:`GnoProblem`.

    ``sigma_caps`` and ``rho_caps`` are scalars or per-variable arrays in
    ``[0, 1]``.  The start point is the case-file operating point with all
    relaxations at zero; voltages outside ``[vmin, vmax]`` are clipped onto the
    box.
    """
    if not 0 < vmin < vmax:
        raise ValueError(f"need 0 < vmin < vmax, got ({vmin}, {vmax})")
    nd, ng = len(net.demands), len(net.gens)
    npf = acpf.state_size(net)
    sig_bus, rho_bus = _retained(net)
    ns, nr = len(sig_bus), len(rho_bus)
    sig_caps = np.broadcast_to(np.asarray(sigma_caps, dtype=float), (ns,)).copy()
    r_caps = np.broadcast_to(np.asarray(rho_caps, dtype=float), (nr,)).copy()
    for caps in (sig_caps, r_caps):
        if np.any(caps < 0) or np.any(caps > 1):
            raise ValueError("relaxation caps must lie in [0, 1]")
    n = npf + 2 * ns + nr

    layout = {
        "V_D": slice(0, nd),
        "theta_G": slice(nd, nd + ng),
        "theta_D": slice(nd + ng, npf),
        "sigma_plus": slice(npf, npf + ns),
        "sigma_minus": slice(npf + ns, npf + 2 * ns),
        "rho": slice(npf + 2 * ns, n),
    }

    absP = np.abs(net.P)
    absQ = np.abs(net.Q)
    p = np.zeros(n)
    p[layout["sigma_plus"]] = absP[sig_bus]
    p[layout["sigma_minus"]] = absP[sig_bus]
    p[layout["rho"]] = absP[rho_bus] + absQ[rho_bus]

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[layout["V_D"]] = vmin
    ub[layout["V_D"]] = vmax
    for key, caps in (("sigma_plus", sig_caps), ("sigma_minus", sig_caps), ("rho", r_caps)):
        lb[layout[key]] = 0.0
        ub[layout[key]] = caps

    x0 = np.zeros(n)
    x0[:npf] = acpf.PfState.from_network(net).vector
    x0[layout["V_D"]] = np.clip(x0[layout["V_D"]], vmin, vmax)

    # constant relaxation block E: c(x) = F(V, theta) - E @ x[npf:]
    gpos = {int(b): k for k, b in enumerate(net.gens)}
    dpos = {int(b): k for k, b in enumerate(net.demands)}
    rows, cols, vals = [], [], []
    for k, b in enumerate(sig_bus):
        r = gpos[int(b)]
        rows += [r, r]
        cols += [k, ns + k]
        vals += [absP[b], -absP[b]]
    for k, b in enumerate(rho_bus):
        j = dpos[int(b)]
        rows += [ng + j, ng + nd + j]
        cols += [2 * ns + k, 2 * ns + k]
        vals += [absP[b], absQ[b]]
    E = sp.csc_matrix((vals, (rows, cols)), shape=(npf, 2 * ns + nr))
    minusE = -E

    def c(x):
        return acpf.residual(net, x[:npf]) - E @ x[npf:]

    def jac(x):
        return sp.hstack([acpf.jacobian(net, x[:npf]), minusE], format="csc")

    def hess(x, lam):
        H = acpf.lagrangian_hessian(net, x[:npf], lam)
        return sp.block_diag([H, sp.csc_matrix((n - npf, n - npf))], format="csc")

    return GnoProblem(
        p=p,
        c=c,
        jac=jac,
        hess=hess,
        lb=lb,
        ub=ub,
        omega=restoration_omega(net) if omega is None else float(omega),
        x0=x0,
        layout=layout,
        known_best=0.0,
        crash_columns=np.arange(npf),
        meta={
            "net": net,
            "vmin": float(vmin),
            "vmax": float(vmax),
            "sigma_buses": sig_bus,
            "rho_buses": rho_bus,
        },
    )


@dataclass
class BusShed:
    """One row of the per-bus report (MW / MVAr)."""

    bus: int
    demanded_P: float
    demanded_Q: float
    injected_P: float
    injected_Q: float
    shed_percent: float
    at_vmin: bool


@dataclass
class RestorationPlan:
    shed_fraction: dict
    gen_adjust: dict
    total_P_shed: float
    total_Q_shed: float
    buses_shed: list
    buses_at_vmin: list
    objective: float
    gen_curtailed: float = 0.0
    buses_curtailed: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_buses_shed(self):
        return len(self.buses_shed)

    @property
    def total_P_relief(self):
        """Load shed plus generation curtailed (MW)."""
        return self.total_P_shed + self.gen_curtailed

    @property
    def n_buses_relieved(self):
        return len(self.buses_shed) + len(self.buses_curtailed)

    def to_dict(self):
        d = asdict(self)
        d["shed_fraction"] = {str(k): v for k, v in self.shed_fraction.items()}
        d["gen_adjust"] = {str(k): v for k, v in self.gen_adjust.items()}
        return d

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["bus", "demanded_P_MW", "demanded_Q_MVAr", "injected_P_MW",
                    "injected_Q_MVAr", "shed_percent", "at_vmin"])
        for r in self.rows:
            # repr keeps every digit so the file reads back to the same floats
            w.writerow([r.bus, repr(r.demanded_P), repr(r.demanded_Q), repr(r.injected_P),
                        repr(r.injected_Q), repr(r.shed_percent), int(r.at_vmin)])
        return buf.getvalue()


def plan_from_csv(text):
    """Rebuild the per-bus rows written by :meth:`RestorationPlan.to_csv`."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(BusShed(
            bus=int(rec["bus"]),
            demanded_P=float(rec["demanded_P_MW"]),
            demanded_Q=float(rec["demanded_Q_MVAr"]),
            injected_P=float(rec["injected_P_MW"]),
            injected_Q=float(rec["injected_Q_MVAr"]),
            shed_percent=float(rec["shed_percent"]),
            at_vmin=bool(int(rec["at_vmin"])),
        ))
    return rows


def decode_plan(prob, x, diagnostics=None):
    """Translate a solution vector of :func:`build_restoration` into a plan."""
    net = prob.meta["net"]
    vmin = prob.meta["vmin"]
    base = net.baseMVA
    lay = prob.layout
    x = np.asarray(x, dtype=float)
    rho = x[lay["rho"]]
    sig = x[lay["sigma_plus"]] - x[lay["sigma_minus"]]
    rho_bus = prob.meta["rho_buses"]
    sig_bus = prob.meta["sigma_buses"]

    V = x[lay["V_D"]]
    low = {net.bus_label(b) for b, v in zip(net.demands, V) if v <= vmin + ACTIVITY_TOL}

    shed_fraction = {net.bus_label(b): float(r) for b, r in zip(rho_bus, rho)}
    gen_adjust = {net.bus_label(b): float(s) for b, s in zip(sig_bus, sig)}
    shed = [(b, r) for b, r in zip(rho_bus, rho) if r > ACTIVITY_TOL]
    rows = []
    for b, r in shed:
        dP = net.Pd[b] * base
        dQ = net.Qd[b] * base
        rows.append(BusShed(
            bus=net.bus_label(b),
            demanded_P=float(dP),
            demanded_Q=float(dQ),
            injected_P=float(dP * (1 - r)),
            injected_Q=float(dQ * (1 - r)),
            shed_percent=float(100 * r),
            at_vmin=net.bus_label(b) in low,
        ))
    cut = [(b, abs(s)) for b, s in zip(sig_bus, sig) if abs(s) > ACTIVITY_TOL]
    total_P = float(sum(abs(net.P[b]) * r for b, r in shed) * base)
    total_Q = float(sum(abs(net.Q[b]) * r for b, r in shed) * base)
    return RestorationPlan(
        shed_fraction=shed_fraction,
        gen_adjust=gen_adjust,
        total_P_shed=total_P,
        total_Q_shed=total_Q,
        buses_shed=sorted(net.bus_label(b) for b, _ in shed),
        buses_at_vmin=sorted(low),
        objective=float(prob.p @ x),
        gen_curtailed=float(sum(abs(net.P[b]) * s for b, s in cut) * base),
        buses_curtailed=sorted(net.bus_label(b) for b, _ in cut),
        rows=rows,
        diagnostics=dict(diagnostics or {}),
    )
