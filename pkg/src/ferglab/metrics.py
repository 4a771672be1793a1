"""Probability metrics and ergodicity coefficients on finite spaces.

Conventions
-----------
* Total variation uses the functional (mass-2) norm ``sum |p - q|``, so two
  distinct point masses are at distance 2. This matches the identity
  ``||delta_x - delta_y||_TV (1 - delta(T)) = 2 (1 - delta(T))`` used when
  choosing the Lipschitz constant of a finite-state kernel. The setwise
  normalization (half of this) is never returned.
* Measures act on kernels from the left: ``(mu K)_j = sum_i mu_i K_ij``.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, LPError, MetricError, StochasticityError
from .lp import linprog
from .transport import solve_transport

PROB_TOL = 1e-12
DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """A finite metric space ``(X, d)``.

    ``kind`` is one of ``"discrete"``, ``"grid-1d"`` or ``"explicit"`` and is
    only used to pick closed-form shortcuts; the distance matrix is always
    the ground truth. ``coords`` holds the positions of a 1-D grid.
    """

    points: tuple
    dist: np.ndarray
    kind: str = "explicit"
    coords: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def size(self):
        return len(self.points)

    @property
    def diameter(self):
        return float(self.dist.max(initial=0.0))

    @classmethod
    def discrete(cls, n_or_points):
        points = range(n_or_points) if isinstance(n_or_points, int) else n_or_points
        points = tuple(points)
        n = len(points)
        return cls(points, 1.0 - np.eye(n), kind="discrete")

    @classmethod
    def grid_1d(cls, n, lo=0.0, hi=1.0):
        if n < 2:
            raise ValueError("a 1-D grid needs at least two points")
        x = np.linspace(lo, hi, n)
        return cls(tuple(x.tolist()), np.abs(x[:, None] - x[None, :]), kind="grid-1d", coords=x)

    @classmethod
    def from_matrix(cls, dist, points=None, validate=True, tol=DEFAULT_TOL):
        d = np.asarray(dist, dtype=float)
        if points is None:
            points = range(d.shape[0])
        space = cls(tuple(points), d, kind="explicit")
        if validate:
            check_metric(space.dist, tol=tol)
        if len(space.points) != d.shape[0]:
            raise DimensionError("number of point labels does not match the distance matrix")
        return space


def check_metric(d, tol=DEFAULT_TOL):
    """Raise MetricError unless ``d`` is a finite metric on its index set."""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise MetricError(f"distance matrix must be square, got shape {d.shape}")
    if not np.isfinite(d).all():
        raise MetricError("distance matrix has non-finite entries")
    if (d < 0).any():
        raise MetricError("distance matrix has negative entries")
    if np.abs(np.diag(d)).max(initial=0.0) > tol:
        raise MetricError("distance matrix has a nonzero diagonal")
    asym = np.abs(d - d.T).max(initial=0.0)
    if asym > tol:
        raise MetricError(f"distance matrix is not symmetric (max asymmetry {asym:.3e})")
    n = d.shape[0]
    for k in range(n):
        # d[i, j] <= d[i, k] + d[k, j] for all i, j
        excess = d - (d[:, k][:, None] + d[k, :][None, :])
        if excess.max(initial=-1.0) > tol:
            i, j = np.unravel_index(np.argmax(excess), excess.shape)
            raise MetricError(f"triangle inequality fails for ({i}, {k}, {j})")


def as_prob(p, n=None, tol=PROB_TOL, name="probability vector"):
    """Validate and return ``p`` as a float array on the simplex."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional")
    if n is not None and p.size != n:
        raise DimensionError(f"{name} has length {p.size}, expected {n}")
    if (p < 0).any():
        raise StochasticityError(f"{name} has negative weights")
    s = p.sum()
    if abs(s - 1.0) > tol:
        raise StochasticityError(f"{name} sums to {s!r}", row_sum=s)
    return p


def check_stochastic(K, tol=PROB_TOL, name="kernel"):
    """Validate a row-stochastic matrix; returns it as a float array."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2:
        raise DimensionError(f"{name} must be a matrix")
    if not np.isfinite(K).all():
        raise StochasticityError(f"{name} has non-finite entries")
    bad = np.argwhere((K < 0) | (K > 1 + tol))
    if bad.size:
        i, j = bad[0]
        raise StochasticityError(f"{name} entry ({i}, {j}) = {K[i, j]!r} outside [0, 1]", row=int(i))
    sums = K.sum(axis=1)
    off = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if off.size:
        i = int(off[0])
        raise StochasticityError(f"{name} row {i} sums to {sums[i]!r}", row=i, row_sum=float(sums[i]))
    return K


def _pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError(f"shape mismatch: {p.shape} vs {q.shape}")
    return p, q


def tv_distance(p, q):
    """Total variation distance ``sum_i |p_i - q_i|`` (values in [0, 2])."""
    p, q = _pair(p, q)
    return float(np.abs(p - q).sum())


def _w1_line(p, q, x):
    order = np.argsort(x)
    cdf = np.cumsum((p - q)[order])[:-1]
    return float(np.abs(cdf) @ np.diff(x[order]))


def w1_distance(p, q, space, method="lp"):
    """Wasserstein-1 distance with ground metric ``space.dist``.

    ``method="lp"`` solves the primal transport problem. ``method="auto"``
    uses exact closed forms where the space allows them (half the TV norm
    under the discrete metric, the CDF formula on a 1-D grid) and falls back
    to the LP otherwise.
    """
    p, q = _pair(p, q)
    if p.size != space.size:
        raise DimensionError(f"vectors of length {p.size} on a space of {space.size} points")
    if method == "auto":
        if space.kind == "discrete":
            return 0.5 * tv_distance(p, q)
        if space.kind == "grid-1d" and space.coords is not None:
            return _w1_line(p, q, space.coords)
    elif method != "lp":
        raise ValueError(f"unknown method {method!r}")
    # transport only the mass that actually has to move
    common = np.minimum(p, q)
    a = p - common
    b = q - common
    if a.sum() <= 0.0 or b.sum() <= 0.0:
        # only round-off residue left on one side
        return 0.0
    b = b * (a.sum() / b.sum())
    return solve_transport(a, b, space.dist).cost


def bl_distance(p, q, space, method="lp", return_witness=False):
    """Bounded-Lipschitz distance: sup of ``f.(p - q)`` over ``||f||_inf + ||f||_L <= 1``.

    Solved as the LP dual (a flow problem with ``n + 2`` rows): minimize
    ``s`` over nonnegative edge flows ``pi_ij``, surpluses ``a_i, b_i`` with
    ``sum_j pi_ij - pi_ji + a_i - b_i = p_i - q_i``, ``sum(a + b) <= s`` and
    ``sum pi_ij d_ij <= s``. With ``return_witness`` the optimal test
    function ``f`` (read from the duals) is returned as well.

    ``method="auto"`` uses ``tv / 3`` for the discrete metric.
    """
    p, q = _pair(p, q)
    n = p.size
    if n != space.size:
        raise DimensionError(f"vectors of length {n} on a space of {space.size} points")
    g = p - q
    if method == "auto" and space.kind == "discrete" and not return_witness:
        return tv_distance(p, q) / 3.0
    if method not in ("lp", "auto"):
        raise ValueError(f"unknown method {method!r}")
    if not np.any(g):
        return (0.0, np.zeros(n)) if return_witness else 0.0

    d = space.dist
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    n_edges = ii.size
    # columns: [pi (n_edges) | a (n) | b (n) | s]
    nv = n_edges + 2 * n + 1
    A_eq = np.zeros((n, nv))
    A_eq[ii, np.arange(n_edges)] += 1.0
    A_eq[jj, np.arange(n_edges)] -= 1.0
    A_eq[:, n_edges:n_edges + n] = np.eye(n)
    A_eq[:, n_edges + n:n_edges + 2 * n] = -np.eye(n)
    A_ub = np.zeros((2, nv))
    A_ub[0, n_edges:n_edges + 2 * n] = 1.0
    A_ub[0, -1] = -1.0
    A_ub[1, :n_edges] = d[ii, jj]
    A_ub[1, -1] = -1.0
    c = np.zeros(nv)
    c[-1] = 1.0
    try:
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(2), A_eq=A_eq, b_eq=g, tol=1e-12)
    except LPError as exc:
        # f = 0 is always feasible in the primal, so this is a solver fault
        raise RuntimeError(f"bounded-Lipschitz LP failed: {exc}") from exc
    value = max(res.fun, 0.0)
    if return_witness:
        return value, res.duals_eq.copy()
    return value


def hilbert_metric(mu, nu, tol=0.0):
    """Hilbert projective metric between two nonnegative vectors.

    Comparable means identical supports; the metric is then
    ``log max(mu/nu) - log min(mu/nu)`` over the common support. Returns 0
    when both are zero and ``inf`` when they are not comparable. Entries at
    or below ``tol`` count as zero.
    """
    mu, nu = _pair(mu, nu)
    if (mu < 0).any() or (nu < 0).any():
        raise ValueError("Hilbert metric is defined for nonnegative vectors")
    smu = mu > tol
    snu = nu > tol
    if not smu.any() and not snu.any():
        return 0.0
    if not np.array_equal(smu, snu):
        return math.inf
    logr = np.log(mu[smu]) - np.log(nu[smu])
    return float(logr.max() - logr.min())


def dobrushin_coefficient(K):
    """Dobrushin coefficient ``min_{x,y} sum_j min(K_xj, K_yj)``.

    On a finite target space the infimum over partitions is attained by the
    partition into singletons, so only row pairs are enumerated.
    """
    K = check_stochastic(K)
    n = K.shape[0]
    if n < 2:
        return 1.0
    best = 1.0
    for x in range(n - 1):
        overlaps = np.minimum(K[x][None, :], K[x + 1:]).sum(axis=1)
        best = min(best, float(overlaps.min()))
    return best


def dobrushin_partition_bruteforce(K):
    """Reference value of the Dobrushin coefficient by enumerating every partition
    of the target space. Exponential; intended for at most ~6 target points."""
    K = np.asarray(K, dtype=float)
    m = K.shape[1]
    best = math.inf
    for blocks in _set_partitions(list(range(m))):
        masses = np.stack([K[:, b].sum(axis=1) for b in blocks], axis=1)
        for x, y in itertools.combinations_with_replacement(range(K.shape[0]), 2):
            best = min(best, float(np.minimum(masses[x], masses[y]).sum()))
    return best


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def birkhoff_coefficients(K):
    """Projective diameter ``H(K)`` and Birkhoff contraction ``tanh(H/4)``.

    ``H`` is the largest Hilbert distance between two rows of ``K`` (the
    image of the cone under ``mu -> mu K`` is spanned by the rows), i.e. the
    maximum of ``log(K_ik K_jl / (K_jk K_il))``. It is infinite as soon as two
    rows have different supports.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2:
        raise DimensionError("Birkhoff coefficients need a matrix")
    if (K < 0).any():
        raise ValueError("Birkhoff coefficients need a nonnegative matrix")
    H = 0.0
    for i in range(K.shape[0]):
        for j in range(i + 1, K.shape[0]):
            H = max(H, hilbert_metric(K[i], K[j]))
            if math.isinf(H):
                return math.inf, 1.0
    return H, math.tanh(H / 4.0)


def mixing_constant(K):
    """Exhibit ``(eps, lam)`` with ``eps * lam_j <= K_ij <= lam_j / eps``.

    Uses the per-column geometric mean ``lam_j = sqrt(m_j M_j)`` of the
    column minimum and maximum, which gives the largest ``eps`` achievable
    with per-column box constraints. Returns None when the kernel is not
    mixing (some column mixes zero and positive entries).
    """
    K = check_stochastic(K)
    lo = K.min(axis=0)
    hi = K.max(axis=0)
    if ((lo <= 0) & (hi > 0)).any():
        return None
    lam = np.sqrt(lo * hi)
    live = hi > 0
    eps = float(np.sqrt(lo[live] / hi[live]).min())
    return eps, lam
