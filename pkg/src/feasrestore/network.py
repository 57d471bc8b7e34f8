"""Algebraic grid model: bus partition, per-unit data and the admittance matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import matpower_io as mio
from .errors import DimensionMismatch, IsolatedBus, NoSlackBus


@dataclass(frozen=True, eq=False)
class PowerNetwork:
    """Per-unit network data with the {ref, generator, demand} bus partition.

    ``P`` and ``Q`` are the scheduled net injections (generation minus
    demand), so demand buses carry ``P <= 0``.  ``V0``/``theta0`` hold the
    case-file operating point with generator setpoints applied; for buses in
    ``gens`` and the slack, ``V0`` is the fixed voltage setpoint.
    """

    baseMVA: float
    bus_ids: np.ndarray
    slack: int
    gens: np.ndarray
    demands: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    Pd: np.ndarray
    Qd: np.ndarray
    Pg: np.ndarray
    V0: np.ndarray
    theta0: np.ndarray
    Ybus: sp.csr_matrix
    lines: frozenset = field(default_factory=frozenset)
    name: str = "case"

    @property
    def n_bus(self):
        return len(self.bus_ids)

    @property
    def G(self):
        return self.Ybus.real.tocsr()

    @property
    def B(self):
        return self.Ybus.imag.tocsr()

    @property
    def Vset(self):
        """Voltage setpoints on generator buses and the slack."""
        idx = np.concatenate([[self.slack], self.gens])
        return dict(zip(idx.tolist(), self.V0[idx].tolist()))

    @property
    def theta_slack(self):
        return float(self.theta0[self.slack])

    def bus_label(self, i):
        return int(self.bus_ids[i])


def make_ybus(case):
    """Bus admittance matrix (p.u.) from in-service branches and bus shunts.

    Standard pi-model with off-nominal tap ratio and phase shift on the
    from-side; line charging split b/2 at each end.
    """
    n = case.n_bus
    idx = case.bus_index()
    br = case.branch[case.branch[:, mio.BR_STATUS] > 0]
    f = np.array([idx[int(b)] for b in br[:, mio.F_BUS]], dtype=int)
    t = np.array([idx[int(b)] for b in br[:, mio.T_BUS]], dtype=int)
    ys = 1.0 / (br[:, mio.BR_R] + 1j * br[:, mio.BR_X])
    bc = br[:, mio.BR_B]
    tap = np.where(br[:, mio.TAP] != 0, br[:, mio.TAP], 1.0)
    tap = tap * np.exp(1j * np.deg2rad(br[:, mio.SHIFT]))
    ytt = ys + 0.5j * bc
    yff = ytt / (tap * np.conj(tap))
    yft = -ys / np.conj(tap)
    ytf = -ys / tap
    ysh = (case.bus[:, mio.GS] + 1j * case.bus[:, mio.BS]) / case.baseMVA
    rows = np.concatenate([f, f, t, t, np.arange(n)])
    cols = np.concatenate([f, t, f, t, np.arange(n)])
    vals = np.concatenate([yff, yft, ytf, ytt, ysh])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_network(case):
    base = case.baseMVA
    bus = case.bus
    n = case.n_bus
    idx = case.bus_index()
    types = bus[:, mio.BUS_TYPE].astype(int)
    if np.any(types == mio.NONE):
        bad = int(bus[np.argmax(types == mio.NONE), mio.BUS_I])
        raise IsolatedBus(f"bus {bad} is marked isolated")
    refs = np.flatnonzero(types == mio.REF)
    if len(refs) != 1:
        raise NoSlackBus(f"expected one reference bus, found {len(refs)}")
    slack = int(refs[0])

    gen = case.gen[case.gen[:, mio.GEN_STATUS] > 0]
    gbus = np.array([idx[int(b)] for b in gen[:, mio.GEN_BUS]], dtype=int)
    Pg = np.bincount(gbus, weights=gen[:, mio.PG], minlength=n) / base
    Qg = np.bincount(gbus, weights=gen[:, mio.QG], minlength=n) / base
    has_gen = np.bincount(gbus, minlength=n) > 0
    if not has_gen[slack]:
        raise NoSlackBus("reference bus has no in-service generator")

    is_gen = (types == mio.PV) & has_gen
    is_gen[slack] = False
    gens = np.flatnonzero(is_gen)
    demands = np.flatnonzero(~is_gen & (np.arange(n) != slack))

    Pd = bus[:, mio.PD] / base
    Qd = bus[:, mio.QD] / base
    V0 = bus[:, mio.VM].astype(float).copy()
    # generator voltage setpoint overrides the stored magnitude
    V0[gbus] = gen[:, mio.VG]
    theta0 = np.deg2rad(bus[:, mio.VA])

    on = case.branch[:, mio.BR_STATUS] > 0
    ends = [idx[int(b)] for b in case.branch[on][:, [mio.F_BUS, mio.T_BUS]].ravel()]
    degree = np.bincount(np.array(ends, dtype=int), minlength=n)
    if n > 1 and np.any(degree == 0):
        bad = int(bus[np.argmax(degree == 0), mio.BUS_I])
        raise IsolatedBus(f"bus {bad} has no in-service branch")
    lines = frozenset(
        (idx[int(a)], idx[int(b)]) for a, b in case.branch[on][:, [mio.F_BUS, mio.T_BUS]]
    )
    return PowerNetwork(
        baseMVA=base,
        bus_ids=bus[:, mio.BUS_I].astype(int),
        slack=slack,
        gens=gens,
        demands=demands,
        P=Pg - Pd,
        Q=Qg - Qd,
        Pd=Pd,
        Qd=Qd,
        Pg=Pg,
        V0=V0,
        theta0=theta0,
        Ybus=make_ybus(case),
        lines=lines,
        name=case.name,
    )


def complex_power_injection(net, V, theta):
    """Active and reactive injections at every bus for polar voltages (V, theta)."""
    V = np.asarray(V, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if V.shape != (net.n_bus,) or theta.shape != (net.n_bus,):
        raise DimensionMismatch(f"expected vectors of length {net.n_bus}")
    Vc = V * np.exp(1j * theta)
    S = Vc * np.conj(net.Ybus @ Vc)
    return S.real, S.imag
