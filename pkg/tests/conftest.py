import numpy as np
import pytest

from feasrestore import matpower_io as mio
from feasrestore.solver import SlpConfig
from feasrestore.study import solve_case

# criterion number -> (passed, description); filled by test_acceptance.py
ACCEPTANCE = {}


def case_text(buses, gens, branches, base=100.0, name="toy"):
    """MATPOWER text from compact rows.

    ``buses``: (id, type, Pd, Qd, Gs, Bs, Vm, Va); ``gens``: (bus, Pg, Qg, Vg);
    ``branches``: (f, t, r, x, b) or (f, t, r, x, b, tap, shift, status).
    """
    lines = [f"function mpc = {name}", "mpc.version = '2';", f"mpc.baseMVA = {base};", "mpc.bus = ["]
    for bid, typ, pd, qd, gs, bs, vm, va in buses:
        lines.append(f"\t{bid}\t{typ}\t{pd}\t{qd}\t{gs}\t{bs}\t1\t{vm}\t{va}\t100\t1\t1.1\t0.9;")
    lines += ["];", "mpc.gen = ["]
    for gbus, pg, qg, vg in gens:
        lines.append(f"\t{gbus}\t{pg}\t{qg}\t99\t-99\t{vg}\t100\t1\t200\t0;")
    lines += ["];", "mpc.branch = ["]
    for br in branches:
        f, t, r, x, b = br[:5]
        tap, shift, status = br[5:] if len(br) > 5 else (0, 0, 1)
        lines.append(f"\t{f}\t{t}\t{r}\t{x}\t{b}\t0\t0\t0\t{tap}\t{shift}\t{status}\t-360\t360;")
    lines += ["];", ""]
    return "\n".join(lines)


def two_bus(r=0.0, x=0.1, pd=0.0, qd=0.0, bs=0.0):
    """Slack bus 1 feeding PQ bus 2 through one branch."""
    return mio.parse_case(case_text(
        [(1, 3, 0, 0, 0, bs, 1.0, 0.0), (2, 1, pd, qd, 0, 0, 1.0, 0.0)],
        [(1, 0, 0, 1.0)],
        [(1, 2, r, x, 0.0)],
    ), name="two_bus")


def three_bus_path():
    """1 - 2 - 3 path: every line is a bridge."""
    return mio.parse_case(case_text(
        [(1, 3, 0, 0, 0, 0, 1.0, 0.0), (2, 1, 10, 5, 0, 0, 1.0, 0.0), (3, 1, 10, 5, 0, 0, 1.0, 0.0)],
        [(1, 20, 10, 1.0)],
        [(1, 2, 0.01, 0.1, 0.0), (2, 3, 0.01, 0.1, 0.0)],
    ), name="path3")


@pytest.fixture(scope="session")
def case57():
    return mio.read_case("case57")


@pytest.fixture(scope="session")
def case118():
    return mio.read_case("case118")


@pytest.fixture(scope="session")
def case300():
    return mio.read_case("case300")


@pytest.fixture(scope="session")
def solved(case57, case118, case300):
    """Cached ``solve_case`` results keyed by case name, contingency and options."""
    cases = {"case57": case57, "case118": case118, "case300": case300}
    cache = {}

    def run(name, contingency, vmin, vmax, as_enabled=True):
        key = (name, contingency, vmin, vmax, as_enabled)
        if key not in cache:
            cfg = SlpConfig(as_enabled=as_enabled)
            cache[key] = solve_case(cases[name], contingency, vmin, vmax, cfg)
        return cache[key]

    return run


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {text}")
