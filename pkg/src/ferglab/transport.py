"""Discrete optimal transport on top of the dense simplex."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError, LPNumericalError
from .lp import linprog

MASS_TOL = 1e-9


@dataclass
class TransportPlan:
    """Optimal coupling of two discrete measures.

    ``u`` and ``v`` are dual potentials certifying optimality:
    ``cost_matrix[i, j] >= u[i] + v[j]`` everywhere, with equality on the
    support of ``plan``.
    """

    plan: np.ndarray
    cost: float
    u: np.ndarray
    v: np.ndarray


def _transport_constraints(m, n):
    # row sums for all sources, column sums for all but the last target
    # (the dropped one is implied by equal total mass)
    A = np.zeros((m + n - 1, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1.0
    for j in range(n - 1):
        A[m + j, j::n] = 1.0
    return A


def least_cost_basis(supply, demand, cost):
    """Basic feasible solution of the transportation problem by the
    least-cost rule: ``m + n - 1`` cells forming a spanning tree, returned as
    flat indices ``i * n + j``."""
    s = np.array(supply, dtype=float)
    d = np.array(demand, dtype=float)
    m, n = cost.shape
    row_alive = np.ones(m, dtype=bool)
    col_alive = np.ones(n, dtype=bool)
    rows_left, cols_left = m, n
    cells = []
    for flat in np.argsort(cost, axis=None, kind="stable"):
        i, j = divmod(int(flat), n)
        if not (row_alive[i] and col_alive[j]):
            continue
        amount = min(s[i], d[j])
        s[i] -= amount
        d[j] -= amount
        cells.append(flat)
        if rows_left == 1 and cols_left == 1:
            break
        # each allocation retires exactly one line so the cells form a tree
        if (s[i] <= d[j] and rows_left > 1) or cols_left == 1:
            row_alive[i] = False
            rows_left -= 1
            d[j] += s[i]
            s[i] = 0.0
        else:
            col_alive[j] = False
            cols_left -= 1
            s[i] += d[j]
            d[j] = 0.0
    return np.array(cells, dtype=int)


def solve_transport(source, target, cost, tol=1e-9):
    """Solve the transportation LP between two nonnegative weight vectors.

    Zero-mass rows and columns are removed before the LP is built. The
    returned plan is checked against its dual potentials (complementary
    slackness and dual feasibility); a failed check raises
    :class:`~ferglab.errors.LPNumericalError`.
    """
    a = np.asarray(source, dtype=float).ravel()
    b = np.asarray(target, dtype=float).ravel()
    C = np.asarray(cost, dtype=float)
    if C.shape != (a.size, b.size):
        raise DimensionError(f"cost matrix {C.shape} does not match weights {a.size}x{b.size}")
    if a.min(initial=0.0) < 0 or b.min(initial=0.0) < 0:
        raise ValueError("transport weights must be nonnegative")
    if C.min(initial=0.0) < 0:
        raise ValueError("transport cost must be nonnegative")
    if abs(a.sum() - b.sum()) > MASS_TOL:
        raise ValueError(f"mass mismatch: {a.sum()!r} vs {b.sum()!r}")

    rows = np.flatnonzero(a > 0)
    cols = np.flatnonzero(b > 0)
    plan = np.zeros_like(C)
    u = np.zeros(a.size)
    v = np.zeros(b.size)
    if rows.size == 0 or cols.size == 0:
        # nothing to move (any residual mass is below MASS_TOL)
        return TransportPlan(plan, 0.0, u, v)

    ar = a[rows]
    bc = b[cols] * (ar.sum() / b[cols].sum())
    Cs = C[np.ix_(rows, cols)]
    m, n = Cs.shape
    if n == 1:
        sub = ar[:, None].copy()
        us, vs = Cs[:, 0].copy(), np.zeros(1)
    elif m == 1:
        sub = bc[None, :].copy()
        us, vs = np.zeros(1), Cs[0, :].copy()
    else:
        A = _transport_constraints(m, n)
        beq = np.concatenate([ar, bc[:-1]])
        start = least_cost_basis(ar, bc, Cs)
        res = linprog(Cs.ravel(), A_eq=A, b_eq=beq, tol=1e-12,
                      basis0=start if start.size == m + n - 1 else None)
        sub = res.x.reshape(m, n)
        us = res.duals_eq[:m]
        vs = np.concatenate([res.duals_eq[m:], [0.0]])

    plan[np.ix_(rows, cols)] = sub
    total = float((Cs * sub).sum())
    scale = max(1.0, float(np.abs(Cs).max()))
    reduced = Cs - us[:, None] - vs[None, :]
    if reduced.min() < -tol * scale:
        raise LPNumericalError(f"dual infeasibility {reduced.min():.3e} in transport certificate")
    if np.abs(reduced * sub).sum() > tol * scale:
        raise LPNumericalError("complementary slackness violated in transport certificate")
    if abs(total - (us @ ar + vs @ bc)) > tol * scale:
        raise LPNumericalError("primal and dual transport objectives disagree")

    u[rows] = us
    v[cols] = vs
    # potentials for zero-mass rows/cols: tightest values keeping dual feasibility
    zr = np.setdiff1d(np.arange(a.size), rows)
    if zr.size:
        u[zr] = (C[np.ix_(zr, cols)] - v[cols][None, :]).min(axis=1)
    zc = np.setdiff1d(np.arange(b.size), cols)
    if zc.size:
        v[zc] = (C[:, zc] - u[:, None]).min(axis=0)
    return TransportPlan(plan, total, u, v)


def assignment_distance(cost):
    """Mean cost of the optimal one-to-one matching of two equal-size clouds."""
    C = np.asarray(cost, dtype=float)
    if C.shape[0] != C.shape[1]:
        raise DimensionError("assignment needs a square cost matrix")
    r, c = linear_sum_assignment(C)
    return float(C[r, c].mean())
