import numpy as np
import pytest

from feasrestore import acpf
from feasrestore import matpower_io as mio
from feasrestore.errors import DimensionMismatch, IsolatedBus, NoSlackBus
from feasrestore.network import build_network, complex_power_injection

from conftest import case_text, two_bus


def dense_ybus(case):
    """Reassemble the admittance matrix one branch at a time from pi-model primitives."""
    n = case.n_bus
    pos = {int(b): i for i, b in enumerate(case.bus[:, 0])}
    Y = np.zeros((n, n), dtype=complex)
    for row in case.branch:
        if row[mio.BR_STATUS] <= 0:
            continue
        i, k = pos[int(row[mio.F_BUS])], pos[int(row[mio.T_BUS])]
        z = complex(row[mio.BR_R], row[mio.BR_X])
        y = 1 / z
        half_b = 1j * row[mio.BR_B] / 2
        ratio = row[mio.TAP] if row[mio.TAP] != 0 else 1.0
        a = ratio * np.exp(1j * np.pi * row[mio.SHIFT] / 180)
        Y[i, i] += (y + half_b) / abs(a) ** 2
        Y[k, k] += y + half_b
        Y[i, k] += -y / a.conjugate()
        Y[k, i] += -y / a
    for j, row in enumerate(case.bus):
        Y[j, j] += complex(row[mio.GS], row[mio.BS]) / case.baseMVA
    return Y


def test_two_bus_admittance():
    net = build_network(two_bus(r=0.0, x=0.1))
    assert np.allclose(net.B.toarray(), [[-10, 10], [10, -10]], atol=1e-12)
    assert np.allclose(net.G.toarray(), 0.0, atol=1e-15)


def test_bus_shunt_adds_to_diagonal():
    base = build_network(two_bus())
    shunted = build_network(two_bus(bs=5.0))  # 5 MVAr on a 100 MVA base
    diff = shunted.B.toarray() - base.B.toarray()
    assert diff[0, 0] == pytest.approx(0.05, abs=1e-15)
    diff[0, 0] = 0
    assert np.all(diff == 0)


def test_case57_admittance_matches_dense_oracle(case57):
    net = build_network(case57)
    assert np.abs(net.Ybus.toarray() - dense_ybus(case57)).max() <= 1e-12


def test_case300_admittance_matches_dense_oracle(case300):
    net = build_network(case300)
    assert np.abs(net.Ybus.toarray() - dense_ybus(case300)).max() <= 1e-12


def test_partition_and_per_unit(case57):
    net = build_network(case57)
    parts = np.concatenate([[net.slack], net.gens, net.demands])
    assert sorted(parts.tolist()) == list(range(57))
    assert np.allclose(net.Pd * 100, case57.bus[:, mio.PD])
    assert np.all(net.P[net.demands] <= 0)
    assert np.all(net.Q[net.demands] <= 0)
    assert len(net.gens) == 6 and len(net.demands) == 50


def test_symmetric_without_taps():
    case = mio.parse_case(case_text(
        [(1, 3, 0, 0, 0, 0, 1.0, 0.0), (2, 1, 10, 5, 0, 0, 1.0, 0.0), (3, 2, 0, 0, 0, 0, 1.0, 0.0)],
        [(1, 20, 10, 1.0), (3, 10, 0, 1.02)],
        [(1, 2, 0.01, 0.1, 0.02), (2, 3, 0.02, 0.2, 0.01), (1, 3, 0.03, 0.15, 0.0)],
    ))
    net = build_network(case)
    assert np.abs(net.G - net.G.T).max() == 0
    assert np.abs(net.B - net.B.T).max() == 0


def test_no_slack_and_isolated_bus(case57):
    bus = case57.bus.copy()
    bus[bus[:, mio.BUS_TYPE] == mio.REF, mio.BUS_TYPE] = mio.PV
    with pytest.raises(NoSlackBus):
        build_network(case57.replace(bus=bus))
    case = mio.parse_case(case_text(
        [(1, 3, 0, 0, 0, 0, 1.0, 0.0), (2, 1, 10, 5, 0, 0, 1.0, 0.0), (3, 1, 1, 1, 0, 0, 1.0, 0.0)],
        [(1, 20, 10, 1.0)],
        [(1, 2, 0.01, 0.1, 0.0), (2, 3, 0.01, 0.1, 0.0, 0, 0, 0)],
    ))
    with pytest.raises(IsolatedBus):
        build_network(case)


def test_flat_start_injection_is_zero():
    net = build_network(two_bus())
    P, Q = complex_power_injection(net, np.ones(2), np.zeros(2))
    assert np.allclose(P, 0, atol=1e-15) and np.allclose(Q, 0, atol=1e-15)


def test_two_bus_closed_form():
    net = build_network(two_bus())
    P, _ = complex_power_injection(net, np.ones(2), np.array([0.0, -0.1]))
    assert P[0] == pytest.approx(10 * np.sin(0.1), abs=1e-12)
    assert P[0] == pytest.approx(0.99833, abs=1e-5)


def test_dimension_mismatch():
    net = build_network(two_bus())
    with pytest.raises(DimensionMismatch):
        complex_power_injection(net, np.ones(3), np.zeros(2))


def test_lossless_injections_sum_to_zero(rng):
    case = mio.parse_case(case_text(
        [(1, 3, 0, 0, 0, 0, 1.0, 0.0), (2, 1, 10, 5, 0, 0, 1.0, 0.0), (3, 1, 0, 0, 0, 0, 1.0, 0.0),
         (4, 1, 5, 2, 0, 0, 1.0, 0.0)],
        [(1, 20, 10, 1.0)],
        [(1, 2, 0, 0.1, 0.0), (2, 3, 0, 0.2, 0.0), (3, 4, 0, 0.15, 0.0), (1, 4, 0, 0.3, 0.0)],
    ))
    net = build_network(case)
    for _ in range(20):
        V = rng.uniform(0.8, 1.2, 4)
        th = rng.uniform(-0.5, 0.5, 4)
        P, _ = complex_power_injection(net, V, th)
        assert abs(P.sum()) <= 1e-12
        P0, _ = complex_power_injection(net, V, np.zeros(4))
        assert np.allclose(P0, 0, atol=1e-12)


def test_angle_shift_invariance(case57, rng):
    net = build_network(case57)
    V = rng.uniform(0.9, 1.1, 57)
    th = rng.uniform(-0.3, 0.3, 57)
    P1, Q1 = complex_power_injection(net, V, th)
    P2, Q2 = complex_power_injection(net, V, th + 0.37)
    assert np.allclose(P1, P2, atol=1e-12) and np.allclose(Q1, Q2, atol=1e-12)


def test_case57_solved_profile_matches_schedule(case57):
    net = build_network(case57)
    sol = acpf.newton_solve(net)
    V, th = acpf.full_voltages(net, sol.state)
    P, Q = complex_power_injection(net, V, th)
    pvpq = np.concatenate([net.gens, net.demands])
    assert np.abs(P[pvpq] - net.P[pvpq]).max() <= 1e-6
    assert np.abs(Q[net.demands] - net.Q[net.demands]).max() <= 1e-6
