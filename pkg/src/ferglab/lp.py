"""Dense two-phase tableau simplex for the small LPs used by the metric code.

Problems are taken in the form::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

The default pivoting rule is Bland's smallest-index rule, which cannot
cycle on degenerate problems (transportation problems are very degenerate).
"""

from dataclasses import dataclass

import numpy as np

from .errors import LPInfeasible, LPNumericalError, LPSizeError, LPUnbounded

MAX_VARIABLES = 5000
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100
NOISE_TOL = 1e-8


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    duals_ub: np.ndarray
    duals_eq: np.ndarray
    basis: np.ndarray
    n_pivots: int


class _Tableau:
    def __init__(self, table, basis, tol):
        self.T = table
        self.basis = basis
        self.tol = tol
        self.n_pivots = 0
        # original constraint rows, right-hand side and current cost row,
        # used to rebuild the tableau from scratch
        self.A0 = table[:-1, :-1].copy()
        self.b0 = table[:-1, -1].copy()
        self.cost = None

    def refactor(self):
        """Recompute the tableau from the original data and the current basis."""
        B = self.A0[:, self.basis]
        try:
            body = np.linalg.solve(B, np.column_stack([self.A0, self.b0]))
        except np.linalg.LinAlgError:
            return
        ncols = self.A0.shape[1]
        self.T[:-1, :] = body
        self.T[-1, :] = 0.0
        self.T[-1, :ncols] = self.cost
        self.T[-1, :] -= self.cost[self.basis] @ body

    def pivot(self, r, s):
        T = self.T
        T[r] /= T[r, s]
        col = T[:, s].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        # the pivot column is exactly a unit vector by construction
        T[:, s] = 0.0
        T[r, s] = 1.0
        self.basis[r] = s
        self.n_pivots += 1

    def entering(self, ncols, rule):
        red = self.T[-1, :ncols]
        if rule == "bland":
            cand = np.flatnonzero(red < -self.tol)
            return int(cand[0]) if cand.size else -1
        s = int(np.argmin(red))
        return s if red[s] < -self.tol else -1

    def leaving(self, s):
        T = self.T
        col = T[:-1, s]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            return -1
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
        # Bland: among tied rows, the one whose basic variable has least index
        return int(ties[np.argmin(self.basis[ties])])

    def run(self, ncols, rule, max_iter, bounded=False):
        for it in range(max_iter):
            if it and it % REFACTOR_EVERY == 0:
                self.refactor()
            s = self.entering(ncols, rule)
            if s < 0:
                return
            r = self.leaving(s)
            if r < 0:
                if bounded or self.T[-1, s] > -NOISE_TOL:
                    # round-off in the reduced cost of a column with no usable pivot
                    self.T[-1, s] = 0.0
                    continue
                raise LPUnbounded("objective is unbounded below")
            self.pivot(r, s)
        raise LPNumericalError(f"simplex did not terminate within {max_iter} pivots")


def _try_warm_start(tab, A, b, basis0, first_art, ncols):
    m = A.shape[0]
    if basis0.shape != (m,) or basis0.min(initial=0) < 0 or basis0.max(initial=0) >= first_art:
        return False
    if np.unique(basis0).size != m:
        return False
    try:
        xb = np.linalg.solve(A[:, basis0], b)
    except np.linalg.LinAlgError:
        return False
    if xb.min(initial=0.0) < -1e-12:
        return False
    tab.basis = basis0.copy()
    tab.cost = np.zeros(ncols)
    tab.refactor()
    tab.T[:-1, -1] = np.maximum(tab.T[:-1, -1], 0.0)
    return True


def _as_2d(A, n):
    if A is None:
        return np.zeros((0, n))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != n:
        raise ValueError(f"constraint matrix has {A.shape[1]} columns, expected {n}")
    return A


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *, tol=1e-10,
            rule="bland", max_vars=MAX_VARIABLES, max_iter=None, basis0=None):
    """Solve a small dense LP with nonnegative variables.

    ``basis0`` optionally lists one column index per constraint row (slack
    ``k`` of the inequality block is column ``n + k``) forming a feasible
    starting basis; phase 1 is then skipped. An infeasible or singular
    ``basis0`` is ignored.

    Returns an :class:`LPResult` with the optimal point, objective value and
    the dual multipliers of both constraint blocks (``c - A.T @ y >= 0`` at
    optimum, with ``duals_ub <= 0``).

    Raises LPInfeasible, LPUnbounded, LPSizeError or LPNumericalError.
    """
    if rule not in ("bland", "dantzig"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    if n > max_vars:
        raise LPSizeError(f"{n} variables exceeds the dense solver cap of {max_vars}")
    A_ub = _as_2d(A_ub, n)
    A_eq = _as_2d(A_eq, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    if b_ub.size != m_ub or b_eq.size != m_eq:
        raise ValueError("right-hand side length does not match constraint rows")
    m = m_ub + m_eq

    # rows: [A_ub | I] and [A_eq | 0]
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign

    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ub] = sign[:m_ub] < 0
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    first_art = n + m_ub
    ncols = first_art + n_art

    T = np.zeros((m + 1, ncols + 1))
    T[:m, :first_art] = A
    T[art_rows, first_art + np.arange(n_art)] = 1.0
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    basis[:m_ub] = n + np.arange(m_ub)
    basis[art_rows] = first_art + np.arange(n_art)

    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    tab = _Tableau(T, basis, tol)

    if basis0 is not None and _try_warm_start(tab, A, b, np.asarray(basis0, dtype=int), first_art, ncols):
        n_art = 0

    if n_art:
        tab.cost = np.zeros(ncols)
        tab.cost[first_art:] = 1.0
        T[-1, :] = -T[art_rows].sum(axis=0)
        T[-1, first_art:ncols] = 0.0
        tab.run(ncols, rule, max_iter, bounded=True)
        if -T[-1, -1] > 1e-9 * scale:
            raise LPInfeasible(f"phase-1 residual {-T[-1, -1]:.3e}")
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if tab.basis[i] < first_art:
                continue
            row = np.abs(T[i, :first_art])
            j = int(np.argmax(row)) if row.size else -1
            if j >= 0 and row[j] > 1e-9:
                tab.pivot(i, j)
            else:
                keep[i] = False
        if not keep.all():
            rows = np.concatenate([np.flatnonzero(keep), [m]])
            T = T[rows]
            tab.T = T
            tab.basis = tab.basis[keep]
            tab.A0 = tab.A0[keep]
            tab.b0 = tab.b0[keep]
        kept = np.flatnonzero(keep)
    else:
        kept = np.arange(m)

    T = np.delete(T, np.s_[first_art:ncols], axis=1)
    tab.T = T
    tab.A0 = tab.A0[:, :first_art]
    cfull = np.concatenate([c, np.zeros(m_ub)])
    tab.cost = cfull
    T[-1, :] = 0.0
    T[-1, :first_art] = cfull
    cb = cfull[tab.basis]
    T[-1, :] -= cb @ T[:-1, :]
    tab.run(first_art, rule, max_iter)

    basis = tab.basis
    B = A[np.ix_(kept, basis)]
    try:
        xb = np.linalg.solve(B, b[kept])
        y_kept = np.linalg.solve(B.T, cfull[basis])
    except np.linalg.LinAlgError as exc:
        raise LPNumericalError("final basis is singular") from exc
    xfull = np.zeros(first_art)
    xfull[basis] = xb
    if xfull.min(initial=0.0) < -1e-7 * scale:
        raise LPNumericalError("refined basic solution is infeasible")
    xfull = np.maximum(xfull, 0.0)
    y = np.zeros(m)
    y[kept] = y_kept
    y *= sign
    x = xfull[:n]
    return LPResult(x=x, fun=float(c @ x), duals_ub=y[:m_ub], duals_eq=y[m_ub:],
                    basis=basis.copy(), n_pivots=tab.n_pivots)
