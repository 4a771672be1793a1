"""Independent reference implementations used to derive frozen test values.

Nothing here imports from ``ferglab``: LPs go through scipy's HiGHS,
filters are written as explicit loops, and combinatorial quantities are
enumerated by brute force.
"""

import itertools
import math

import numpy as np
from scipy.optimize import linprog

# HiGHS defaults (1e-7) are too loose for costs near that scale
HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def transport_highs(a, b, C):
    m, n = C.shape
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1
    for j in range(n):
        A[m + j, j::n] = 1
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs", options=HIGHS_OPTIONS)
    assert res.status == 0
    return res.fun


def assignment_bruteforce(C):
    """Mean cost of the best permutation; equals transport with uniform weights."""
    n = C.shape[0]
    perms = np.array(list(itertools.permutations(range(n))))
    return C[np.arange(n), perms].sum(axis=1).min() / n


def bl_highs(p, q, d):
    """sup sum f (p - q) over |f| <= c, |f_i - f_j| <= l d_ij, c + l <= 1."""
    n = len(p)
    nv = n + 2
    rows, rhs = [], []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = np.zeros(nv)
                r[i], r[j], r[n + 1] = 1, -1, -d[i, j]
                rows.append(r)
                rhs.append(0)
        for s in (1, -1):
            r = np.zeros(nv)
            r[i], r[n] = s, -1
            rows.append(r)
            rhs.append(0)
    r = np.zeros(nv)
    r[n] = r[n + 1] = 1
    rows.append(r)
    rhs.append(1)
    c = np.concatenate([-(np.asarray(p) - np.asarray(q)), [0, 0]])
    bounds = [(None, None)] * n + [(0, None), (0, None)]
    res = linprog(c, A_ub=np.array(rows), b_ub=rhs, bounds=bounds, method="highs", options=HIGHS_OPTIONS)
    assert res.status == 0
    return -res.fun


def hilbert_subsets(mu, nu):
    """log( sup_A mu(A)/nu(A) * sup_A nu(A)/mu(A) ) over nonempty subsets."""
    n = len(mu)
    hi, lo = 0.0, math.inf
    for k in range(1, n + 1):
        for A in itertools.combinations(range(n), k):
            m, v = sum(mu[i] for i in A), sum(nu[i] for i in A)
            if m == 0 and v == 0:
                continue
            if m == 0 or v == 0:
                return math.inf
            hi, lo = max(hi, m / v), min(lo, m / v)
    return math.log(hi / lo)


def dobrushin_rowpairs(K):
    n = K.shape[0]
    return min(sum(min(K[x, j], K[y, j]) for j in range(K.shape[1]))
               for x in range(n) for y in range(n))


def predictive_joint(T, Q, z):
    """P(Y = y) by summing the joint law of (X, X', Y) term by term."""
    n, m = Q.shape
    out = [0.0] * m
    for x in range(n):
        for xp in range(n):
            for y in range(m):
                out[y] += z[x] * T[x, xp] * Q[xp, y]
    return np.array(out)


def bayes_loop(T, Q, z, y):
    n = T.shape[0]
    post = [sum(z[x] * T[x, xp] for x in range(n)) * Q[xp, y] for xp in range(n)]
    s = sum(post)
    return np.array(post) / s


def eta_strings(T, Q, z, n):
    """Filter law after n steps: list of (observation string, weight, posterior)."""
    out = []
    for ys in itertools.product(range(Q.shape[1]), repeat=n):
        w, cur = 1.0, np.asarray(z, dtype=float)
        for y in ys:
            py = predictive_joint(T, Q, cur)[y]
            if py == 0:
                w = 0.0
                break
            w *= py
            cur = bayes_loop(T, Q, cur, y)
        if w > 0:
            out.append((ys, w, cur))
    return out


def lifted_w1(A, wa, B, wb, ground):
    C = np.array([[ground(a, b) for b in B] for a in A])
    return transport_highs(np.asarray(wa), np.asarray(wb), C)
