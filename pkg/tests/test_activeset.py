import numpy as np
import pytest

from feasrestore import matpower_io as mio
from feasrestore.activeset import (
    ACCEPT,
    INSUFFICIENT_DECREASE,
    NEEDS_TWEAK,
    AsState,
    NewtonSystem,
    PrimalDual,
    check_candidate,
    kkt_norm,
    run_active_set,
    set_key,
    tweak,
)
from feasrestore.errors import OverdeterminedActiveSet, RevisitedActiveSet, TweakBudgetExceeded
from feasrestore.linalg import KktFactorization
from feasrestore.problem import linear_problem

from oracles import monolithic_newton, planted_kkt_problem, quadratic_problem


def random_pd(rng, prob):
    n = prob.n
    m = len(prob.c(prob.x0))
    return PrimalDual(rng.uniform(-0.8, 0.8, n), rng.normal(size=m), rng.uniform(0, 1, n), -rng.uniform(0, 1, n))


def assert_same(pd, ref, tol=1e-9):
    x, lam, mu, nu = ref[:4]
    scale = max(1.0, max(np.abs(v).max() for v in (x, lam, mu, nu)))
    for a, b in ((pd.x, x), (pd.lam, lam), (pd.mu, mu), (pd.nu, nu)):
        assert np.abs(a - b).max() <= tol * scale


def test_step_matches_monolithic_oracle(rng):
    done = 0
    while done < 30:
        n = int(rng.integers(3, 13))
        m = int(rng.integers(1, min(4, n - 1) + 1))
        prob = quadratic_problem(rng, n, m, box=1.0)
        pd = random_pd(rng, prob)
        k = int(rng.integers(0, n - m + 1))
        active = rng.choice(n, size=k, replace=False)
        L = set(int(i) for i in active[: k // 2])
        U = set(int(i) for i in active[k // 2:])
        ref = monolithic_newton(prob, pd, L, U)
        if np.linalg.cond(ref[4]) > 1e8:
            continue
        cand, changes = NewtonSystem(prob, pd, L, U).step(L, U)
        assert changes == []
        assert_same(cand, ref)
        done += 1


def test_exact_kkt_point_is_fixed(rng):
    prob, x, lam, mu, nu, L, U = planted_kkt_problem(rng, 8, 3, n_lower=2, n_upper=1)
    pd = PrimalDual(x, lam, mu, nu)
    assert kkt_norm(prob, pd) <= 1e-12
    cand, _ = NewtonSystem(prob, pd, L, U).step(L, U)
    assert np.abs(cand.x - x).max() <= 1e-12
    assert np.abs(cand.lam - lam).max() <= 1e-11
    assert np.abs(cand.mu - mu).max() <= 1e-11 and np.abs(cand.nu - nu).max() <= 1e-11


@pytest.mark.parametrize("case", ["a", "b", "c_lower", "c_upper", "d", "e", "mixed"])
def test_border_step_matches_fresh_factorization(rng, case):
    n, m = 12, 3
    prob = quadratic_problem(rng, n, m, box=1.0)
    pd = random_pd(rng, prob)
    L0, U0 = {0, 1}, {2, 3}
    L, U = set(L0), set(U0)
    if case == "a":
        L.add(6)
    elif case == "b":
        U.add(7)
    elif case == "c_lower":
        L.discard(1)
    elif case == "c_upper":
        U.discard(2)
    elif case == "d":
        U.discard(3)
        L.add(3)
    elif case == "e":
        L.discard(1)
        U.add(1)
    else:
        L, U = {0, 3, 4}, {1, 5}
    sysm = NewtonSystem(prob, pd, L0, U0)
    before = KktFactorization.count
    cand, changes = sysm.step(L, U)
    assert KktFactorization.count == before
    expected = {"a": {"a"}, "b": {"b"}, "c_lower": {"c"}, "c_upper": {"c"}, "d": {"d"}, "e": {"e"},
                "mixed": {"a", "b", "c", "d", "e"}}[case]
    assert {c for _, c in changes} == expected
    fresh, _ = NewtonSystem(prob, pd, L, U).step(L, U)
    assert_same(cand, (fresh.x, fresh.lam, fresh.mu, fresh.nu), tol=1e-8)
    assert_same(cand, monolithic_newton(prob, pd, L, U), tol=1e-8)


def test_changes_classification(rng):
    prob = quadratic_problem(rng, 6, 2)
    sysm = NewtonSystem(prob, random_pd(rng, prob), {0}, {1})
    assert sysm.changes({0}, {1}) == []
    assert sysm.changes({0, 2}, {1, 3}) == [(2, "a"), (3, "b")]
    assert sysm.changes(set(), set()) == [(0, "c"), (1, "c")]
    assert sysm.changes({1}, {0}) == [(0, "e"), (1, "d")]


def make_line(lb=0.0, ub=1.0):
    """One variable, one constraint x = 0.5: KKT norm is easy to hand-compute."""
    return linear_problem(p=[1.0], A=[[1.0]], b=[0.5], lb=[lb], ub=[ub], omega=1.0)


def test_check_candidate_accept_and_insufficient():
    prob = make_line()
    # x = 0.5, lam = -1 is the exact solution: norm 0
    exact = PrimalDual(np.array([0.5]), np.array([-1.0]), np.zeros(1), np.zeros(1))
    assert check_candidate(prob, set(), set(), exact, 1.0).kind == ACCEPT
    # norm 0.2 (residual) against a current norm of 0.3: not halved
    off = PrimalDual(np.array([0.7]), np.array([-1.0]), np.zeros(1), np.zeros(1))
    chk = check_candidate(prob, set(), set(), off, 0.3)
    assert chk.kind == INSUFFICIENT_DECREASE and chk.norm == pytest.approx(0.2)


def test_check_candidate_halving_is_inclusive():
    prob = make_line()
    cand = PrimalDual(np.array([0.75]), np.array([-1.0]), np.zeros(1), np.zeros(1))
    assert kkt_norm(prob, cand) == 0.25
    assert check_candidate(prob, set(), set(), cand, 0.5).kind == ACCEPT
    assert check_candidate(prob, set(), set(), cand, np.nextafter(0.5, 0)).kind == INSUFFICIENT_DECREASE


def test_check_candidate_violations():
    prob = make_line()
    low = PrimalDual(np.array([-0.1]), np.array([-1.0]), np.zeros(1), np.zeros(1))
    chk = check_candidate(prob, set(), set(), low, 1.0)
    assert chk.kind == NEEDS_TWEAK and chk.violations == [(0, "below_lower")]
    high = PrimalDual(np.array([1.0]), np.array([-1.0]), np.zeros(1), np.zeros(1))
    assert check_candidate(prob, set(), set(), high, 1.0).violations == [(0, "above_upper")]
    neg = PrimalDual(np.array([0.0]), np.array([-1.0]), np.array([-0.5]), np.zeros(1))
    assert check_candidate(prob, {0}, set(), neg, 1.0).violations == [(0, "mu_negative")]
    pos = PrimalDual(np.array([1.0]), np.array([-1.0]), np.zeros(1), np.array([0.5]))
    assert check_candidate(prob, set(), {0}, pos, 1.0).violations == [(0, "nu_positive")]
    # a fixed variable may carry a multiplier of either sign
    fixed = make_line(0.5, 0.5)
    neg = PrimalDual(np.array([0.5]), np.array([-1.0]), np.array([-0.5]), np.zeros(1))
    assert check_candidate(fixed, {0}, set(), neg, 1.0).violations == []


def pd_zero(n, m):
    return PrimalDual(np.zeros(n), np.zeros(m), np.zeros(n), np.zeros(n))


def test_tweak_rules():
    st = AsState(pd_zero(6, 1), {0}, {1})
    tweak(st, [(2, "below_lower"), (3, "above_upper"), (0, "mu_negative"), (1, "nu_positive")], 6, 1, 10)
    assert st.lower == {2} and st.upper == {3}
    assert st.tweak_count == 1
    assert set_key({2}, {3}) in st.tried
    with pytest.raises(ValueError):
        tweak(st, [], 6, 1, 10)


def test_tweak_budget():
    st = AsState(pd_zero(20, 1), set(), set())
    for i in range(3):
        tweak(st, [(i, "below_lower")], 20, 1, 3)
    with pytest.raises(TweakBudgetExceeded):
        tweak(st, [(5, "below_lower")], 20, 1, 3)


def test_tweak_revisit_and_overdetermined():
    st = AsState(pd_zero(6, 1), {0}, set(), tried={set_key({0}, set())})
    tweak(st, [(0, "mu_negative")], 6, 1, 10)
    with pytest.raises(RevisitedActiveSet):
        tweak(st, [(0, "below_lower")], 6, 1, 10)
    st = AsState(pd_zero(4, 2), {0}, {1}, tried=set())
    with pytest.raises(OverdeterminedActiveSet):
        tweak(st, [(2, "below_lower")], 4, 2, 10)


def test_run_from_exact_solution(rng):
    prob, x, lam, mu, nu, L, U = planted_kkt_problem(rng, 8, 3)
    out = run_active_set(prob, PrimalDual(x, lam, mu, nu), L, U)
    assert out.success and out.iterations == 0 and out.tweaks == 0
    assert np.array_equal(out.pd.x, x)


def test_run_converges_quadratically_from_nearby(rng):
    prob, x, lam, mu, nu, L, U = planted_kkt_problem(rng, 10, 3, n_lower=2, n_upper=2)
    start = PrimalDual(x + 0.02 * rng.normal(size=10), lam + 0.02 * rng.normal(size=3), mu, nu)
    out = run_active_set(prob, start, L, U, tol=1e-12)
    assert out.success and out.tweaks == 0
    assert np.abs(out.pd.x - x).max() <= 1e-10
    h = out.kkt_history
    assert all(h[i + 1] <= 0.5 * h[i] for i in range(len(h) - 1))
    # quadratic contraction until roundoff takes over
    assert all(h[i + 1] <= 10 * h[i] ** 2 for i in range(len(h) - 1) if h[i + 1] > 1e-13)


def test_run_repairs_a_missing_bound(rng):
    prob, x, lam, mu, nu, L, U = planted_kkt_problem(rng, 10, 3, n_lower=2, n_upper=0)
    start = PrimalDual(x.copy(), lam, mu.copy(), nu)
    start.x[0] = -0.9  # variable 0 belongs on its lower bound; start it loose
    start.mu[0] = 0.0
    out = run_active_set(prob, start, L - {0}, U, tol=1e-10)
    assert out.success
    assert out.tweaks == 1 and 0 in out.lower
    tweaks = [e for e in out.events if e["event"] == "tweak"]
    assert tweaks[0]["violations"] == [(0, "below_lower")]
    assert np.abs(out.pd.x - x).max() <= 1e-8
    assert out.pd.mu[0] == pytest.approx(mu[0], abs=1e-8)


def test_run_reports_revisited_sets(rng):
    # this seeded instance cycles: freeing 1 and 2 sends 2 above its bound, and
    # pinning it there makes nu_2 positive, which frees it again
    prob, x, lam, mu, nu, L, U = planted_kkt_problem(rng, 10, 3, n_lower=2, n_upper=2)
    start = PrimalDual(x.copy(), lam, mu.copy(), nu)
    start.x[0] = -0.95
    start.mu[0] = 0.0
    out = run_active_set(prob, start, L - {0}, U)
    assert not out.success and out.reason == "revisit"
    assert out.pd is None and out.iterations == 0
    kinds = [e["violations"] for e in out.events if e["event"] == "tweak"]
    assert kinds[1:] == [[(2, "above_upper")], [(2, "nu_positive")]]


def test_run_rejects_overdetermined_start(rng):
    prob = quadratic_problem(rng, 4, 2)
    out = run_active_set(prob, random_pd(rng, prob), {0, 1}, {2})
    assert not out.success and out.reason == "overdetermined"
    assert out.summary()["reason"] == "overdetermined"


def test_case57_beta2_active_set_converges_superlinearly(solved):
    _, rep, _ = solved("case57", mio.Contingency.scale(2.0), 0.93, 1.07)
    events = [r.as_event for r in rep.trace if r.as_event]
    assert events and events[-1]["success"]
    h = events[-1]["kkt"]
    assert len(h) >= 3 and h[-1] <= 1e-6
    # contraction factors shrink: superlinear
    ratios = [h[i + 1] / h[i] for i in range(len(h) - 1)]
    assert all(ratios[i + 1] < ratios[i] for i in range(len(ratios) - 1))
