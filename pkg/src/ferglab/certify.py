"""Evaluate the checkable hypotheses of the filter ergodicity results for a model."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .metrics import dobrushin_coefficient, mixing_constant
from .model import estimate_alpha

CONSTANT_COLUMN_TOL = 1e-12


@dataclass
class KrWitness:
    observation_string: tuple
    second_singular_value: float
    matrix: np.ndarray

    def to_dict(self):
        return {"observation_string": list(self.observation_string),
                "second_singular_value": self.second_singular_value,
                "matrix": self.matrix.tolist()}


@dataclass
class CertificationReport:
    """Constants and verdicts for one model.

    ``beta = alpha * D * (3 - 2 delta_Q) / 2`` is the certified one-step
    Wasserstein contraction factor of the filter kernel; the geometric
    ergodicity test is ``beta < 1``. ``alpha`` is the constant used for the
    verdict: the analytic bound when the model carries one (gridded
    continuous kernels), otherwise the exact finite-space value
    ``alpha_grid``.
    """

    model_name: str
    alpha: float
    alpha_grid: float
    alpha_analytic: float | None
    alpha_witness: tuple | None
    D: float
    delta_T: float
    delta_Q: float
    beta: float
    margin: float
    assumption1_pass: bool
    corollary_value: float | None
    corollary_finite_pass: bool | None
    nondegenerate: bool
    mixing: tuple | None
    obs_floor: tuple | None
    constant_obs: tuple | None
    clm_rate_c: float | None
    kr_rank1: KrWitness | None
    notes: list = field(default_factory=list)

    def checks(self):
        """Named boolean verdicts, for exit-code selection."""
        return {
            "assumption1": self.assumption1_pass,
            "corollary": bool(self.corollary_finite_pass),
            "nondegenerate": self.nondegenerate,
            "mixing": self.mixing is not None and self.obs_floor is not None,
            "positive_eq": self.constant_obs is not None,
            "kr": self.kr_rank1 is not None,
        }

    def to_dict(self):
        d = asdict(self)
        if self.mixing is not None:
            d["mixing"] = {"epsilon_T": self.mixing[0], "lambda": np.asarray(self.mixing[1]).tolist()}
        if self.obs_floor is not None:
            d["obs_floor"] = {"observation": self.obs_floor[0], "epsilon": self.obs_floor[1]}
        if self.constant_obs is not None:
            d["constant_obs"] = {"observation": self.constant_obs[0], "epsilon": self.constant_obs[1]}
        d["alpha_witness"] = list(self.alpha_witness) if self.alpha_witness else None
        d["kr_rank1"] = self.kr_rank1.to_dict() if self.kr_rank1 is not None else None
        d["checks"] = self.checks()
        return d


def beta_constant(alpha, D, delta_Q):
    return alpha * D * (3.0 - 2.0 * delta_Q) / 2.0


def clm_rate(epsilon_T, epsilon):
    """Hilbert contraction bound ``(1 - eT^2 e) / (1 + eT^2 e)`` for the
    constant-observation filter map."""
    a = epsilon_T ** 2 * epsilon
    return (1.0 - a) / (1.0 + a)


def observation_matrices(model):
    """``M(y)[i, j] = T(j|i) Q(y|j)`` for every observation ``y``."""
    return [model.T * model.Q[:, y][None, :] for y in range(model.n_obs)]


def second_singular_value(M):
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[1]) if s.size > 1 else 0.0


def kr_rank1_search(model, max_depth=8, tol=1e-8, max_products=200_000):
    """Breadth-first search for a (numerically) rank-one observation product.

    Products ``M(y_1) ... M(y_n)`` are scaled by their largest entry and the
    first one (depth first, then lexicographic order) whose second singular
    value is below ``tol`` is returned. ``None`` means no witness was found
    within the budget; it does not refute the rank-one condition.
    """
    mats = observation_matrices(model)
    frontier = [((), np.eye(model.n_states))]
    seen = 0
    for _depth in range(max_depth):
        nxt = []
        for word, P in frontier:
            for y, M in enumerate(mats):
                prod = P @ M
                top = prod.max()
                if top <= 0:
                    continue
                prod = prod / top
                w = word + (y,)
                if second_singular_value(prod) < tol:
                    return KrWitness(w, second_singular_value(prod), prod)
                nxt.append((w, prod))
                seen += 1
                if seen >= max_products:
                    return None
        frontier = nxt
    return None


def certify(model, kr_depth=0, kr_tol=1e-8):
    """Compute every constant and sufficient condition for ``model``.

    Never raises on a failing hypothesis; failures are reported as verdicts
    and notes. ``kr_depth > 0`` also runs :func:`kr_rank1_search`.
    """
    notes = []
    est = estimate_alpha(model.T, model.space)
    alpha = est.alpha
    if model.analytic_alpha is not None:
        alpha = model.analytic_alpha
        notes.append(f"alpha from the analytic bound {model.analytic_alpha:.6g}; grid alpha {est.alpha:.6g}")
        if est.alpha > model.analytic_alpha:
            notes.append("grid alpha exceeds the analytic bound (discretization bias)")
    D = model.space.diameter
    delta_T = dobrushin_coefficient(model.T)
    delta_Q = dobrushin_coefficient(model.Q)
    beta = beta_constant(alpha, D, delta_Q)

    corollary_value = corollary_pass = None
    if model.space.kind == "discrete":
        corollary_value = (1.0 - delta_T) * (3.0 - 2.0 * delta_Q)
        corollary_pass = corollary_value < 1.0
    else:
        notes.append("finite-state corollary needs the discrete metric; not evaluated")

    nondegenerate = bool((model.Q > 0).all())

    floors = model.Q.min(axis=0)
    obs_floor = None
    if floors.max() > 0:
        y = int(np.argmax(floors))
        obs_floor = (y, float(floors[y]))
    else:
        notes.append("no observation has a uniform positive likelihood floor")

    constant_obs = None
    spread = model.Q.max(axis=0) - model.Q.min(axis=0)
    const = np.flatnonzero((spread <= CONSTANT_COLUMN_TOL) & (floors > 0))
    if const.size:
        y = int(const[0])
        constant_obs = (y, float(model.Q[:, y].mean()))

    mixing = mixing_constant(model.T)
    if mixing is None:
        notes.append("T is not a mixing kernel")
    clm_c = None
    if mixing is not None and obs_floor is not None:
        clm_c = clm_rate(mixing[0], obs_floor[1])

    witness = kr_rank1_search(model, kr_depth, kr_tol) if kr_depth > 0 else None
    if kr_depth > 0 and witness is None:
        notes.append(f"no rank-one product found up to depth {kr_depth} (inconclusive)")

    return CertificationReport(
        model_name=model.name, alpha=float(alpha), alpha_grid=est.alpha,
        alpha_analytic=model.analytic_alpha, alpha_witness=est.witness_pair,
        D=D, delta_T=delta_T, delta_Q=delta_Q, beta=beta, margin=1.0 - beta,
        assumption1_pass=bool(beta < 1.0), corollary_value=corollary_value,
        corollary_finite_pass=corollary_pass, nondegenerate=nondegenerate,
        mixing=mixing, obs_floor=obs_floor, constant_obs=constant_obs,
        clm_rate_c=clm_c, kr_rank1=witness, notes=notes)
