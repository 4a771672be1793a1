"""Exact and Monte Carlo verification experiments for the filter chain.

Exact experiments enumerate the finite-support law of the filter (see
:mod:`ferglab.filtering`) and compare laws on Z = P(X) with optimal
transport, Z itself metrized by W1 (or the bounded-Lipschitz metric) on X.
Their inequalities are theorems, so any excess beyond ``tol`` is recorded
as a violation.

Randomness: a master seed is split with :class:`numpy.random.SeedSequence`
into one child stream per path (or per prior pair), so every result is a
pure function of ``(model, arguments, seed)``.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .certify import certify, clm_rate
from .errors import AtomCapExceeded, FerglabError
from .filtering import DEFAULT_ATOM_CAP, AtomicMeasureOnZ, bayes_update, iterate_eta
from .lp import MAX_VARIABLES
from .metrics import (MetricSpace, as_prob, bl_distance, hilbert_metric, mixing_constant,
                      tv_distance, w1_distance)
from .transport import assignment_distance, solve_transport

COST_CAP = 2 ** 20
SKIP_BELOW = 1e-8
FIT_FLOOR = 1e-7


class PreconditionError(FerglabError):
    """The observation chosen for a reachability trace has no positive floor."""

    def __init__(self, message, min_entry=None):
        super().__init__(message)
        self.min_entry = min_entry


def worker_count():
    try:
        return max(1, int(os.environ.get("FERGLAB_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map; threaded when FERGLAB_THREADS > 1."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- ground costs on Z -------------------------------------------------------

def ground_costs(A, B, space, metric="w1", method="auto"):
    """Matrix of distances between the rows of ``A`` and the rows of ``B``.

    ``metric`` is ``"w1"`` or ``"bl"``; ``method="auto"`` uses closed forms
    where :func:`w1_distance` / :func:`bl_distance` would.
    """
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if method == "auto":
        if space.kind == "discrete":
            l1 = np.abs(A[:, None, :] - B[None, :, :]).sum(axis=2)
            return 0.5 * l1 if metric == "w1" else l1 / 3.0
        if metric == "w1" and space.kind == "grid-1d" and space.coords is not None:
            dx = np.diff(space.coords)
            FA = np.cumsum(A, axis=1)[:, :-1]
            FB = np.cumsum(B, axis=1)[:, :-1]
            return np.abs(FA[:, None, :] - FB[None, :, :]) @ dx
    dist = bl_distance if metric == "bl" else w1_distance
    C = np.empty((A.shape[0], B.shape[0]))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            C[i, j] = dist(a, b, space, method=method)
    return C


def w1_on_PZ(A, B, space, method="auto", cap=COST_CAP):
    """Exact W1 between two finite-support measures on (Z, W1).

    Ground cost between atoms is :func:`w1_distance`; the outer problem is
    solved with :func:`solve_transport`.
    """
    if len(A) * len(B) > cap:
        raise AtomCapExceeded(f"{len(A)} x {len(B)} ground costs exceed the cap {cap}")
    C = ground_costs(A.atoms, B.atoms, space, "w1", method)
    return solve_transport(A.weights, B.weights, C).cost


def bl_on_PZ(A, B, space, ground="bl", method="auto"):
    """Exact bounded-Lipschitz distance between two finite-support measures
    on Z, with Z metrized by ``ground`` (``"bl"`` or ``"w1"`` on X).

    Identical atoms are merged; the BL LP then runs on the union of atoms.
    """
    atoms = np.concatenate([A.atoms, B.atoms])
    w = np.concatenate([np.concatenate([A.weights, np.zeros(len(B))])[:, None],
                        np.concatenate([np.zeros(len(A)), B.weights])[:, None]], axis=1)
    uniq, inverse = np.unique(atoms, axis=0, return_inverse=True)
    W = np.zeros((uniq.shape[0], 2))
    np.add.at(W, inverse.ravel(), w)
    if uniq.shape[0] == 1:
        return 0.0
    C = ground_costs(uniq, uniq, space, ground, method)
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 0.0)
    lifted = MetricSpace.from_matrix(C, validate=False)
    return bl_distance(W[:, 0], W[:, 1], lifted)


# -- result types --------------------------------------------------------------

@dataclass
class ContractionResult:
    pairs_tested: int
    max_ratio: float
    bound: float
    violations: list
    ratios: np.ndarray = field(repr=False)
    skipped: int = 0
    tol: float = 1e-9

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {"pairs_tested": self.pairs_tested, "max_ratio": self.max_ratio,
                "bound": self.bound, "violations": [list(v) for v in self.violations],
                "skipped": self.skipped, "tol": self.tol, "passed": self.passed}


@dataclass
class DecayCurve:
    n_values: np.ndarray
    distances: np.ndarray
    mode: str
    fitted_rate: float
    bounds: np.ndarray | None = None
    stderr: np.ndarray | None = None
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {"mode": self.mode, "n": self.n_values.tolist(), "distance": self.distances.tolist(),
                "bound": None if self.bounds is None else self.bounds.tolist(),
                "stderr": None if self.stderr is None else self.stderr.tolist(),
                "fitted_rate": self.fitted_rate, "violations": [list(v) for v in self.violations]}

    def rows(self):
        """CSV rows ``(n, distance, bound, stderr)``."""
        nan = float("nan")
        for k, n in enumerate(self.n_values):
            yield (int(n), float(self.distances[k]),
                   nan if self.bounds is None else float(self.bounds[k]),
                   nan if self.stderr is None else float(self.stderr[k]))


@dataclass
class ReachabilityTrace:
    iterates: np.ndarray = field(repr=False)
    hilbert_gaps: np.ndarray
    limit: np.ndarray
    rate_bound: float | None
    converged: bool
    ratios: np.ndarray
    violations: list
    tv_to_limit: np.ndarray
    log_path_prob: np.ndarray
    second_limit: np.ndarray | None = None
    prior_gap_tv: float | None = None
    fixed_point_gap: float | None = None

    def to_dict(self):
        return {"iterations": int(self.iterates.shape[0] - 1), "converged": self.converged,
                "limit": self.limit.tolist(), "rate_bound": self.rate_bound,
                "max_ratio": float(np.max(self.ratios)) if self.ratios.size else None,
                "violations": [list(v) for v in self.violations],
                "prior_gap_tv": self.prior_gap_tv, "fixed_point_gap": self.fixed_point_gap,
                "min_log_path_prob": float(self.log_path_prob.min()) if self.log_path_prob.size else 0.0}


@dataclass
class OccupationResult:
    N_values: np.ndarray
    distances: np.ndarray
    stderr: np.ndarray

    def to_dict(self):
        return {"N": self.N_values.tolist(), "distance": self.distances.tolist(),
                "stderr": self.stderr.tolist()}


def fit_rate(n_values, distances, floor=FIT_FLOOR):
    """Least-squares slope of ``log distance`` against ``n`` over points above ``floor``."""
    n = np.asarray(n_values, dtype=float)
    d = np.asarray(distances, dtype=float)
    ok = d > floor
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(n[ok], np.log(d[ok]), 1)[0])


def dirichlet_pairs(n_states, n_pairs, seed):
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.dirichlet(np.ones(n_states), size=(n_pairs, 2))


def _beta(model, beta):
    return certify(model).beta if beta is None else beta


# -- exact experiments -------------------------------------------------------

def one_step_contraction_test(model, n_pairs=200, seed=0, beta=None, tol=1e-9, method="auto"):
    """Exact ratio ``W1(eta(.|z0), eta(.|z0')) / W1(z0, z0')`` over Dirichlet(1)
    prior pairs, compared with the certified factor ``beta``."""
    beta = _beta(model, beta)
    pairs = dirichlet_pairs(model.n_states, n_pairs, seed)

    def ratio(pair):
        z0, z1 = pair
        den = w1_distance(z0, z1, model.space, method=method)
        if den < SKIP_BELOW:
            return math.nan
        num = w1_on_PZ(iterate_eta(model, z0, 1), iterate_eta(model, z1, 1), model.space, method)
        return num / den

    return _contraction_summary(parallel_map(ratio, pairs), beta, tol)


def _contraction_summary(values, bound, tol):
    r = np.asarray(values, dtype=float)
    ok = ~np.isnan(r)
    violations = [(int(i), float(r[i])) for i in np.flatnonzero(ok & (r > bound + tol))]
    return ContractionResult(pairs_tested=int(ok.sum()), max_ratio=float(r[ok].max(initial=0.0)),
                             bound=float(bound), violations=violations, ratios=r,
                             skipped=int((~ok).sum()), tol=tol)


def n_step_decay(model, z0, z0p, n_max, atom_cap=DEFAULT_ATOM_CAP, beta=None, tol=1e-9,
                 method="auto"):
    """Exact curve ``n -> W1(eta^n(.|z0), eta^n(.|z0'))`` for ``n = 0..n_max``,
    checked against ``beta^n W1(z0, z0')``."""
    if model.n_obs ** n_max > atom_cap:
        raise AtomCapExceeded(f"|Y|^{n_max} exceeds the atom cap {atom_cap}")
    beta = _beta(model, beta)
    d0 = w1_distance(z0, z0p, model.space, method=method)
    dist = []
    for n in range(n_max + 1):
        A = iterate_eta(model, z0, n, atom_cap=atom_cap)
        B = iterate_eta(model, z0p, n, atom_cap=atom_cap)
        dist.append(w1_on_PZ(A, B, model.space, method))
    ns = np.arange(n_max + 1)
    dist = np.array(dist)
    bounds = beta ** ns * d0
    violations = [(int(n), float(dist[n]), float(bounds[n]))
                  for n in ns if dist[n] > bounds[n] + tol]
    return DecayCurve(ns, dist, "exact", fit_rate(ns, dist), bounds=bounds, violations=violations)


def bl_regularity_test(model, n_max=4, n_pairs=50, seed=0, ground="bl", alpha=None,
                       atom_cap=DEFAULT_ATOM_CAP, tol=1e-9, method="auto"):
    """Exact ``rho_BL(eta^n(.|z), eta^n(.|z')) / rho_BL(z, z')`` for
    ``n = 0..n_max`` over Dirichlet(1) pairs, against ``3 (1 + alpha)``.

    The ratio recorded per pair is the maximum over ``n``.
    """
    if model.n_obs ** n_max > atom_cap:
        raise AtomCapExceeded(f"|Y|^{n_max} exceeds the atom cap {atom_cap}")
    if alpha is None:
        alpha = certify(model).alpha
    pairs = dirichlet_pairs(model.n_states, n_pairs, seed)

    def ratio(pair):
        z, zp = pair
        den = bl_distance(z, zp, model.space, method=method)
        if den < SKIP_BELOW:
            return math.nan
        worst = 0.0
        for n in range(n_max + 1):
            A = iterate_eta(model, z, n, atom_cap=atom_cap)
            B = iterate_eta(model, zp, n, atom_cap=atom_cap)
            worst = max(worst, bl_on_PZ(A, B, model.space, ground, method) / den)
        return worst

    return _contraction_summary(parallel_map(ratio, pairs), 3.0 * (1.0 + alpha), tol)


# -- Monte Carlo ---------------------------------------------------------------

def path_uniforms(seed, n_paths, shape):
    """Per-path uniform streams; path ``p`` depends only on ``(seed, p)``."""
    children = np.random.SeedSequence(seed).spawn(n_paths)
    return np.stack([np.random.default_rng(c).random(shape) for c in children])


def _draw(probs, u):
    """Inverse-CDF draw per row of ``probs`` (``(P, k)``) with uniforms ``u``."""
    cdf = np.cumsum(probs, axis=1)
    idx = (cdf < u[:, None] * cdf[:, -1:]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def simulate_filter_clouds(model, z0, n_max, n_paths, seed):
    """Simulate hidden/observation paths from prior ``z0`` and filter them.

    Returns an array ``(n_max + 1, n_paths, |X|)`` of filter states.
    """
    z0 = as_prob(z0, model.n_states, tol=1e-9)
    U = path_uniforms(seed, n_paths, (n_max + 1, 2))
    x = _draw(np.broadcast_to(z0, (n_paths, z0.size)), U[:, 0, 0])
    Z = np.broadcast_to(z0, (n_paths, z0.size)).copy()
    out = np.empty((n_max + 1, n_paths, z0.size))
    out[0] = Z
    for k in range(1, n_max + 1):
        x = _draw(model.T[x], U[:, k, 0])
        y = _draw(model.Q[x], U[:, k, 1])
        post = (Z @ model.T) * model.Q[:, y].T
        Z = post / post.sum(axis=1, keepdims=True)
        out[k] = Z
    return out


def _empirical_distance(Sa, Sb, space, n_boot, rng, method="auto"):
    """W1 between equal-size empirical clouds on Z, with a paired bootstrap
    standard error (paths are resampled jointly)."""
    P = Sa.shape[0]
    atoms, inverse = np.unique(np.concatenate([Sa, Sb]), axis=0, return_inverse=True)
    inverse = inverse.ravel()
    ia, ib = inverse[:P], inverse[P:]
    k = atoms.shape[0]
    C = ground_costs(atoms, atoms, space, "w1", method)

    if k * k <= MAX_VARIABLES:
        def dist(idx):
            wa = np.bincount(ia[idx], minlength=k) / P
            wb = np.bincount(ib[idx], minlength=k) / P
            return solve_transport(wa, wb, C).cost
    else:
        def dist(idx):
            return assignment_distance(C[np.ix_(ia[idx], ib[idx])])

    est = dist(np.arange(P))
    if n_boot <= 0:
        return est, float("nan")
    boots = [dist(rng.integers(0, P, P)) for _ in range(n_boot)]
    return est, float(np.std(boots, ddof=1))


def mc_decay(model, z0, z0p, n_max, n_paths=400, seed=0, n_boot=100, beta=None, method="auto"):
    """Monte Carlo decay curve: empirical W1 on Z between the filter clouds
    started from ``z0`` and ``z0'`` (same path seeds), with bootstrap errors."""
    Sa = simulate_filter_clouds(model, z0, n_max, n_paths, seed)
    Sb = simulate_filter_clouds(model, z0p, n_max, n_paths, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    dist, err = [], []
    for n in range(n_max + 1):
        d, e = _empirical_distance(Sa[n], Sb[n], model.space, n_boot, rng, method)
        dist.append(d)
        err.append(e)
    ns = np.arange(n_max + 1)
    dist = np.array(dist)
    bounds = _beta(model, beta) ** ns * w1_distance(z0, z0p, model.space, method=method)
    return DecayCurve(ns, dist, "monte-carlo", fit_rate(ns, dist), bounds=bounds, stderr=np.array(err))


# -- reachability -------------------------------------------------------------

def stationary_distribution(T):
    """Left Perron vector of a stochastic matrix (solves ``pi (T - I) = 0``)."""
    T = np.asarray(T, dtype=float)
    n = T.shape[0]
    A = np.vstack([T.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def _constant_run(model, mu, y, max_iter, gap_tol):
    z = mu
    iterates = [z]
    gaps = []
    loglik = [0.0]
    for _ in range(max_iter):
        pred = z @ model.T
        post = pred * model.Q[:, y]
        s = post.sum()
        nz = post / s
        gaps.append(hilbert_metric(nz, z))
        loglik.append(loglik[-1] + math.log(s))
        z = nz
        iterates.append(z)
        if gaps[-1] < gap_tol:
            break
    return np.array(iterates), np.array(gaps), np.array(loglik[1:])


def reachable_state_trace(model, mu, y_prime, max_iter=1000, gap_tol=1e-10, second_prior=None,
                          ratio_tol=1e-6, ratio_floor=1e-8):
    """Filter iterates under the constant observation ``y'``.

    Requires ``min_x Q(y'|x) > 0``. Records Hilbert gaps
    ``h(z_{k+1}, z_k)``; when ``T`` is mixing the ratios of successive gaps
    (from the second gap on, while the denominator exceeds ``ratio_floor``)
    are checked against the contraction bound. The run is repeated from
    ``second_prior`` (uniform, or a point mass if ``mu`` is uniform) to
    measure prior dependence of the limit.
    """
    mu = as_prob(mu, model.n_states, tol=1e-9)
    col = model.Q[:, y_prime]
    if col.min() <= 0:
        raise PreconditionError(f"observation {model.obs_labels[y_prime]!r} has minimum likelihood "
                                f"{float(col.min()):g}; a positive floor is required", min_entry=float(col.min()))
    iterates, gaps, logp = _constant_run(model, mu, y_prime, max_iter, gap_tol)
    limit = iterates[-1]
    converged = bool(gaps.size and gaps[-1] < gap_tol)

    rate = None
    mix = mixing_constant(model.T)
    if mix is not None:
        rate = clm_rate(mix[0], float(col.min()))
    ratios, violations = [], []
    for k in range(1, gaps.size - 1):
        if not math.isfinite(gaps[k]) or gaps[k] <= ratio_floor:
            continue
        r = gaps[k + 1] / gaps[k]
        ratios.append(r)
        if rate is not None and r > rate + ratio_tol:
            violations.append((k, float(r)))

    if second_prior is None:
        uniform = np.full(model.n_states, 1.0 / model.n_states)
        second_prior = uniform if not np.allclose(mu, uniform) else np.eye(model.n_states)[0]
    second, _, _ = _constant_run(model, as_prob(second_prior, model.n_states, tol=1e-9),
                                 y_prime, max_iter, gap_tol)
    fixed_gap = None
    if np.ptp(col) <= 1e-12:
        fixed_gap = hilbert_metric(limit, bayes_update(model, limit, y_prime))
    return ReachabilityTrace(
        iterates=iterates, hilbert_gaps=gaps, limit=limit, rate_bound=rate, converged=converged,
        ratios=np.array(ratios), violations=violations,
        tv_to_limit=np.abs(iterates - limit).sum(axis=1), log_path_prob=logp,
        second_limit=second[-1], prior_gap_tv=tv_distance(limit, second[-1]), fixed_point_gap=fixed_gap)


# -- occupation measures -----------------------------------------------------

def simulate_filter_chain(model, prior, N, n_paths, seed):
    """Sample the filter chain ``Z_k`` directly from its kernel: ``y_k`` is
    drawn from the predictive law of ``Z_{k-1}`` by inverse CDF with the
    path's own uniform stream. Returns ``(N, n_paths, |X|)`` for ``k = 1..N``.

    Chains started from different priors with the same seed share their
    uniforms, which couples them.
    """
    z = as_prob(prior, model.n_states, tol=1e-9)
    U = path_uniforms(seed, n_paths, N)
    Z = np.broadcast_to(z, (n_paths, z.size)).copy()
    out = np.empty((N, n_paths, z.size))
    for k in range(N):
        pred = Z @ model.T
        y = _draw(pred @ model.Q, U[:, k])
        post = pred * model.Q[:, y].T
        Z = post / post.sum(axis=1, keepdims=True)
        out[k] = Z
    return out


def occupation_average(model, prior, N, n_paths, seed):
    """Empirical Cesaro occupation measure ``(1/N) sum_{k=1..N} delta_{Z_k}``
    pooled over paths, with identical atoms merged."""
    S = simulate_filter_chain(model, prior, N, n_paths, seed)
    return AtomicMeasureOnZ.empirical(S.reshape(-1, model.n_states)).merged()


def occupation_distance(model, prior_a, prior_b, N_values, n_paths=500, seed=0, n_boot=200,
                        method="auto"):
    """Distance between the occupation measures of the filter chain from two priors.

    Both chains are driven by the same uniforms, so pairing ``Z_k^a`` with
    ``Z_k^b`` is a coupling of the two occupation measures and its mean cost
    ``(1/N) sum_k E W1(Z_k^a, Z_k^b)`` bounds their W1 distance from above.
    The estimate and a bootstrap standard error (resampling paths) are
    returned for every horizon in ``N_values``.
    """
    N_values = np.asarray(sorted(N_values), dtype=int)
    Nmax = int(N_values[-1])
    Sa = simulate_filter_chain(model, prior_a, Nmax, n_paths, seed)
    Sb = simulate_filter_chain(model, prior_b, Nmax, n_paths, seed)
    space = model.space
    if method == "auto" and space.kind == "discrete":
        step = 0.5 * np.abs(Sa - Sb).sum(axis=2)
    elif method == "auto" and space.kind == "grid-1d":
        dx = np.diff(space.coords)
        step = np.abs(np.cumsum(Sa - Sb, axis=2)[:, :, :-1]) @ dx
    else:
        step = np.array([[w1_distance(a, b, space) for a, b in zip(Sa[k], Sb[k])] for k in range(Nmax)])
    # per-path prefix averages, shape (len(N_values), n_paths)
    csum = np.cumsum(step, axis=0)
    per_path = csum[N_values - 1] / N_values[:, None]
    est = per_path.mean(axis=1)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    idx = rng.integers(0, n_paths, size=(n_boot, n_paths))
    boots = per_path[:, idx].mean(axis=2)
    return OccupationResult(N_values, est, boots.std(axis=1, ddof=1))
