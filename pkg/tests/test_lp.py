import numpy as np
import pytest
import scipy.sparse as sp

from feasrestore import matpower_io as mio
from feasrestore.cnso import active_sets
from feasrestore.lp import (
    AT_LOWER,
    AT_UPPER,
    BASIC,
    Basis,
    DualSimplex,
    LpSubproblem,
    extract_multipliers,
    slack_basis,
    solve_subproblem,
)
from feasrestore.lp.highs import solve_subproblem_highs
from feasrestore.network import build_network
from feasrestore.problem import linear_problem
from feasrestore.restoration import build_restoration

from oracles import random_subproblem, vertex_enumeration


def dual_objective(sub, sol):
    """Value of the dual of the l1 subproblem at the returned multipliers."""
    return float(sub.omega * sol.lam @ sub.c_k + sol.mu @ sub.l + sol.nu @ sub.u)


def stationarity(sub, sol):
    return np.abs(sub.p + sub.omega * (sub.J_k.T @ sol.lam) - sol.mu - sol.nu).max()


def test_blocked_descent_gives_zero_step():
    J = sp.csc_matrix(np.array([[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]]))
    sub = LpSubproblem(np.zeros(2), J, np.array([1.0, 2.0, 0.5]), 10.0, np.zeros(3), np.ones(3))
    sol = solve_subproblem(sub)
    assert np.array_equal(sol.d, np.zeros(3))
    assert np.array_equal(sol.alpha, np.zeros(2))


def test_one_dimensional_breakpoint():
    sub = LpSubproblem(np.array([0.5]), sp.csc_matrix([[1.0]]), np.array([1.0]), 10.0,
                       np.array([-1.0]), np.array([1.0]))
    sol = solve_subproblem(sub)
    assert sol.d[0] == pytest.approx(-0.5, abs=1e-12)
    assert sol.alpha[0] == pytest.approx(0.0, abs=1e-12)
    assert sol.objective == pytest.approx(-0.5, abs=1e-12)


def test_matches_vertex_enumeration(rng):
    for _ in range(150):
        sub = random_subproblem(rng)
        best, _ = vertex_enumeration(sub)
        sol = solve_subproblem(sub)
        assert sol.objective == pytest.approx(best, abs=1e-9, rel=1e-9)
        assert sub.objective(sol.d) == pytest.approx(sol.objective, abs=1e-12)


def test_duals_strong_duality_and_signs(rng):
    for _ in range(200):
        sub = random_subproblem(rng)
        sol = solve_subproblem(sub)
        assert np.all(np.abs(sol.lam) <= 1.0)
        assert np.all(sol.mu >= 0) and np.all(sol.nu <= 0)
        assert stationarity(sub, sol) <= 1e-8
        assert dual_objective(sub, sol) == pytest.approx(sol.objective, abs=1e-8)
        # complementary slackness on the step bounds
        assert np.all(sol.mu * (sol.d - sub.l) <= 1e-9)
        assert np.all(-sol.nu * (sub.u - sol.d) <= 1e-9)
        assert np.all(sol.d >= sub.l - 1e-12) and np.all(sol.d <= sub.u + 1e-12)


def test_matches_highs(rng):
    for _ in range(100):
        sub = random_subproblem(rng, n=int(rng.integers(3, 12)), m=int(rng.integers(1, 6)))
        mine = solve_subproblem(sub)
        ref = solve_subproblem_highs(sub)
        assert mine.objective == pytest.approx(ref.objective, abs=1e-9, rel=1e-9)


def test_step_bounds_validation():
    J = sp.csc_matrix([[1.0]])
    with pytest.raises(ValueError):
        LpSubproblem(np.zeros(1), J, np.ones(1), 1.0, np.array([0.1]), np.array([1.0]))
    with pytest.raises(ValueError):
        LpSubproblem(np.zeros(1), J, np.ones(1), 1.0, np.array([-np.inf]), np.array([1.0]))


def test_subproblem_at_respects_box():
    prob = linear_problem(p=[1.0, -1.0], A=[[1.0, 1.0]], b=[1.0], lb=[0.0, -1.0], ub=[2.0, 0.5], omega=3.0)
    x = np.array([0.0, 0.3])
    sub = LpSubproblem.at(prob, x, prob.c(x), prob.jac(x), 1.0)
    assert np.allclose(sub.l, [0.0, -1.0]) and np.allclose(sub.u, [1.0, 0.2])
    assert np.all(sub.l <= 0) and np.all(sub.u >= 0)


def test_warm_start_after_radius_shrink(case57):
    net = build_network(mio.apply_contingency(case57, mio.Contingency.scale(2.0)))
    prob = build_restoration(net, 0.93, 1.07)
    x = prob.x0
    c, J = prob.c(x), prob.jac(x)
    first = solve_subproblem(LpSubproblem.at(prob, x, c, J, 1.0), crash_columns=prob.crash_columns)
    shrunk = LpSubproblem.at(prob, x, c, J, 0.5)
    warm = solve_subproblem(shrunk, warm=first.basis, crash_columns=prob.crash_columns)
    cold = solve_subproblem(shrunk, crash_columns=prob.crash_columns)
    assert warm.objective == pytest.approx(cold.objective, rel=1e-9, abs=1e-9)
    assert warm.pivots <= cold.pivots


def test_warm_start_at_optimum_needs_no_pivots(rng):
    sub = random_subproblem(rng, n=5, m=3)
    sol = solve_subproblem(sub)
    again = solve_subproblem(sub, warm=sol.basis)
    assert again.pivots == 0
    assert again.objective == pytest.approx(sol.objective, abs=1e-12)


def test_unusable_warm_basis_falls_back(rng):
    sub = random_subproblem(rng, n=4, m=2)
    bad = slack_basis(random_subproblem(rng, n=6, m=3))
    sol = solve_subproblem(sub, warm=bad)
    assert sol.objective == pytest.approx(vertex_enumeration(sub)[0], abs=1e-9)


def test_basis_statuses_consistent(rng):
    sub = random_subproblem(rng, n=5, m=3)
    sol = solve_subproblem(sub)
    st = sol.basis.status
    assert np.all(st[sol.basis.basic] == BASIC)
    assert set(np.unique(st)) <= {BASIC, AT_LOWER, AT_UPPER}
    assert np.sum(st == BASIC) == 3


def test_degenerate_flag():
    # the zero residual makes the basic slack sit on its lower bound
    J = sp.csc_matrix([[1.0, 1.0]])
    sub = LpSubproblem(np.zeros(1), J, np.array([1.0, 1.0]), 5.0, np.zeros(2), np.ones(2))
    assert solve_subproblem(sub).degenerate


def test_dual_simplex_direct():
    # min x1 + 2 x2  s.t. x1 + x2 = 1, 0 <= x <= 1  ->  x = (1, 0)
    A = sp.csc_matrix([[1.0, 1.0]])
    lp = DualSimplex(A, np.array([1.0]), np.array([1.0, 2.0]), np.zeros(2), np.ones(2))
    # start with x2 basic; x1 has negative reduced cost and is placed at its upper bound
    res = lp.solve(Basis(np.array([1]), np.array([AT_LOWER, BASIC], dtype=np.int8)))
    assert np.allclose(res.x, [1.0, 0.0])
    assert res.objective == pytest.approx(1.0)
    assert np.allclose(res.y, [2.0]) and np.allclose(res.reduced_costs, [-1.0, 0.0])


def test_extract_multipliers_passthrough(rng):
    sub = random_subproblem(rng, n=4, m=2)
    sol = solve_subproblem(sub)
    n = 4

    class Sets:
        lower = frozenset(range(n))
        upper = frozenset(range(n))

    lam, mu, nu = extract_multipliers(sol, Sets)
    assert np.array_equal(lam, sol.lam) and np.array_equal(mu, sol.mu) and np.array_equal(nu, sol.nu)


def test_extract_multipliers_drops_trust_region_faces():
    # minimizing x with a loose box: the trust region stops the step at -delta
    prob = linear_problem(p=[1.0], A=[[0.0]], b=[0.0], lb=[-5.0], ub=[5.0], omega=1.0)
    x = np.array([0.0])
    sub = LpSubproblem.at(prob, x, prob.c(x), prob.jac(x), 0.5)
    sol = solve_subproblem(sub)
    assert sol.d[0] == pytest.approx(-0.5)
    assert sol.mu[0] == pytest.approx(1.0)
    lam, mu, nu = extract_multipliers(sol, active_sets(prob, x + sol.d))
    assert mu[0] == 0.0
    # a real bound face keeps its multiplier
    x = np.array([-4.75])
    sub = LpSubproblem.at(prob, x, prob.c(x), prob.jac(x), 0.5)
    sol = solve_subproblem(sub)
    lam, mu, nu = extract_multipliers(sol, active_sets(prob, x + sol.d))
    assert mu[0] == pytest.approx(1.0)
