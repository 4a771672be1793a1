import numpy as np
import pytest
from scipy.optimize import linprog as highs

from ferglab.errors import LPInfeasible, LPSizeError, LPUnbounded
from ferglab.lp import MAX_VARIABLES, linprog


def _random_feasible(rng, m_ub, m_eq, n):
    x0 = rng.random(n)
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.random(m_ub)
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = A_eq @ x0
    c = rng.random(n) + 0.1  # bounded below since x >= 0
    return c, A_ub, b_ub, A_eq, b_eq


@pytest.mark.parametrize("seed", range(25))
@pytest.mark.parametrize("rule", ["bland", "dantzig"])
def test_matches_highs_on_random_lps(seed, rule):
    rng = np.random.default_rng(seed)
    c, A_ub, b_ub, A_eq, b_eq = _random_feasible(rng, 4, 2, 7)
    ours = linprog(c, A_ub, b_ub, A_eq, b_eq, rule=rule)
    ref = highs(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert ours.fun == pytest.approx(ref.fun, abs=1e-9)
    assert np.all(A_ub @ ours.x <= b_ub + 1e-9)
    assert np.allclose(A_eq @ ours.x, b_eq, atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_duals_certify_optimality(seed):
    rng = np.random.default_rng(100 + seed)
    c, A_ub, b_ub, A_eq, b_eq = _random_feasible(rng, 3, 3, 6)
    res = linprog(c, A_ub, b_ub, A_eq, b_eq)
    reduced = c - A_ub.T @ res.duals_ub - A_eq.T @ res.duals_eq
    assert reduced.min() >= -1e-9
    assert np.all(res.duals_ub <= 1e-12)
    dual_obj = b_ub @ res.duals_ub + b_eq @ res.duals_eq
    assert dual_obj == pytest.approx(res.fun, abs=1e-9)


def test_negative_rhs_rows_are_handled():
    # x1 + x2 >= 1 written as -x1 - x2 <= -1
    res = linprog([1.0, 2.0], A_ub=[[-1.0, -1.0]], b_ub=[-1.0])
    assert res.fun == pytest.approx(1.0)
    assert res.x == pytest.approx([1.0, 0.0])
    assert res.duals_ub[0] == pytest.approx(-1.0)


def test_redundant_equalities():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    res = linprog([3.0, 1.0, 2.0], A_eq=A, b_eq=[1.0, 2.0])
    assert res.fun == pytest.approx(1.0)


def test_infeasible():
    with pytest.raises(LPInfeasible):
        linprog([1.0], A_eq=[[1.0]], b_eq=[-1.0])


def test_unbounded():
    with pytest.raises(LPUnbounded):
        linprog([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0])


def test_size_cap():
    with pytest.raises(LPSizeError):
        linprog(np.ones(MAX_VARIABLES + 1))


def test_degenerate_assignment_does_not_cycle():
    # uniform transport is maximally degenerate
    n = 6
    rng = np.random.default_rng(3)
    C = rng.random((n, n))
    A = np.zeros((2 * n, n * n))
    for i in range(n):
        A[i, i * n:(i + 1) * n] = 1
        A[n + i, i::n] = 1
    b = np.ones(2 * n)
    res = linprog(C.ravel(), A_eq=A, b_eq=b, rule="bland")
    ref = highs(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert res.fun == pytest.approx(ref.fun, abs=1e-9)


def test_warm_start_gives_same_optimum():
    rng = np.random.default_rng(9)
    c, A_ub, b_ub, _, _ = _random_feasible(rng, 5, 0, 5)
    b_ub = np.abs(b_ub)
    cold = linprog(c, A_ub, b_ub)
    warm = linprog(c, A_ub, b_ub, basis0=5 + np.arange(5))  # all-slack basis
    bad = linprog(c, A_ub, b_ub, basis0=[0, 0, 0, 0, 0])  # ignored
    assert warm.fun == pytest.approx(cold.fun, abs=1e-12)
    assert bad.fun == pytest.approx(cold.fun, abs=1e-12)
