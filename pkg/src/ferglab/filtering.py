"""Exact Bayes filter recursion and the finite-support law of the filter chain.

For a finite observation alphabet the filter kernel ``eta(.|z)`` is a
discrete measure on the simplex: one atom ``F(z, y)`` per observation, with
weight equal to the predictive probability of ``y``. Iterating gives
``eta^n(.|z)`` with at most ``|Y|^n`` atoms, indexed by observation strings.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AtomCapExceeded, DimensionError, ZeroLikelihood
from .metrics import as_prob

PRUNE_TOL = 1e-15
MIN_LIKELIHOOD = 1e-300
DEFAULT_ATOM_CAP = 4096


@dataclass(eq=False)
class AtomicMeasureOnZ:
    """Finitely supported probability measure on the simplex P(X).

    ``atoms`` is a ``(k, |X|)`` array of probability vectors, ``weights`` a
    length-``k`` array; ``labels`` optionally names each atom (for filter
    laws, the observation string that produced it).
    """

    atoms: np.ndarray
    weights: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.atoms.shape[0] != self.weights.size:
            raise DimensionError(f"{self.atoms.shape[0]} atoms but {self.weights.size} weights")
        if (self.weights < 0).any() or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"atom weights must be a probability vector (sum {self.weights.sum()!r})")
        if self.labels is not None and len(self.labels) != self.weights.size:
            raise DimensionError("one label per atom required")

    def __len__(self):
        return self.weights.size

    def mean(self):
        """Barycenter ``sum_i w_i atom_i`` (a probability vector on X)."""
        return self.weights @ self.atoms

    def merged(self):
        """Same measure with bitwise-identical atoms combined (labels dropped)."""
        uniq, inverse = np.unique(self.atoms, axis=0, return_inverse=True)
        w = np.zeros(uniq.shape[0])
        np.add.at(w, inverse.ravel(), self.weights)
        return AtomicMeasureOnZ(uniq, w)

    @classmethod
    def point(cls, z):
        return cls(np.asarray(z, dtype=float)[None, :], np.ones(1))

    @classmethod
    def empirical(cls, samples):
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        k = samples.shape[0]
        return cls(samples, np.full(k, 1.0 / k))


def _check_state(model, z):
    return as_prob(z, model.n_states, tol=1e-9, name="filter state")


def predict(model, z):
    """One-step prediction ``z T``."""
    return np.asarray(z, dtype=float) @ model.T


def predictive_obs(model, z):
    """Predictive law of the next observation: ``y -> sum_x' Q(y|x') (zT)(x')``."""
    z = _check_state(model, z)
    return predict(model, z) @ model.Q


def bayes_update(model, z, y, min_likelihood=MIN_LIKELIHOOD):
    """Filter update ``F(z, y)``: posterior proportional to ``Q(y|.) * (zT)``.

    Raises :class:`ZeroLikelihood` when ``y`` has (numerically) zero
    predictive probability.
    """
    z = _check_state(model, z)
    if not 0 <= y < model.n_obs:
        raise IndexError(f"observation index {y} outside 0..{model.n_obs - 1}")
    post = predict(model, z) * model.Q[:, y]
    s = post.sum()
    if s <= min_likelihood:
        raise ZeroLikelihood(f"observation {model.obs_labels[y]!r} has zero likelihood")
    return post / s


def _expand(model, atoms, weights):
    """Branch every atom on every observation.

    Returns posteriors ``(k, |Y|, |X|)`` and path weights ``(k, |Y|)``.
    """
    pred = atoms @ model.T
    joint = pred[:, None, :] * model.Q.T[None, :, :]
    lik = joint.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = joint / lik[:, :, None]
    return post, weights[:, None] * lik


def filter_branches(model, z, prune=PRUNE_TOL):
    """Exact representation of ``eta(.|z)``: one atom per observation with
    positive predictive weight."""
    return iterate_eta(model, z, 1, prune=prune)


def iterate_eta(model, z, n, atom_cap=DEFAULT_ATOM_CAP, prune=PRUNE_TOL):
    """Exact law of ``Z_n`` given ``Z_0 = z``.

    Atoms are indexed by observation strings ``(y_1, ..., y_n)`` in
    lexicographic order; branches with path weight at or below ``prune`` are
    dropped. Raises :class:`AtomCapExceeded` if ``|Y|^n > atom_cap``.
    """
    z = _check_state(model, z)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if model.n_obs ** n > atom_cap:
        raise AtomCapExceeded(f"|Y|^n = {model.n_obs}^{n} exceeds the atom cap {atom_cap}")
    atoms = z[None, :]
    weights = np.ones(1)
    labels = [()]
    for _ in range(n):
        post, w = _expand(model, atoms, weights)
        keep = w > prune
        idx_k, idx_y = np.nonzero(keep)
        atoms = post[idx_k, idx_y]
        weights = w[idx_k, idx_y]
        labels = [labels[k] + (int(y),) for k, y in zip(idx_k, idx_y)]
    return AtomicMeasureOnZ(atoms, weights, tuple(labels))


def eta_of_measure(model, measure, n=1, atom_cap=DEFAULT_ATOM_CAP, prune=PRUNE_TOL):
    """Push an atomic measure on Z through ``eta^n`` (mixture of the atom laws)."""
    atoms, weights, labels = [], [], []
    for k, (a, w) in enumerate(zip(measure.atoms, measure.weights)):
        sub = iterate_eta(model, a, n, atom_cap=atom_cap, prune=prune)
        atoms.append(sub.atoms)
        weights.append(w * sub.weights)
        base = measure.labels[k] if measure.labels is not None else (k,)
        labels.extend(base + lab for lab in sub.labels)
    return AtomicMeasureOnZ(np.concatenate(atoms), np.concatenate(weights), tuple(labels))


def filter_path(model, z0, observations, return_loglik=False, min_likelihood=MIN_LIKELIHOOD):
    """Run the filter along an observation sequence.

    Returns the ``(N + 1, |X|)`` array of states ``z_0, ..., z_N``; with
    ``return_loglik`` also the log-likelihood of the sequence, accumulated in
    log space. A zero-likelihood observation raises :class:`ZeroLikelihood`
    carrying the (1-based) step index.
    """
    z = _check_state(model, z0)
    path = np.empty((len(observations) + 1, z.size))
    path[0] = z
    loglik = 0.0
    for k, y in enumerate(observations):
        post = predict(model, z) * model.Q[:, y]
        s = post.sum()
        if s <= min_likelihood:
            raise ZeroLikelihood(f"observation {model.obs_labels[y]!r} at step {k + 1} has zero likelihood",
                                 step=k + 1)
        loglik += np.log(s)
        z = post / s
        path[k + 1] = z
    if return_loglik:
        return path, float(loglik)
    return path


def bayes_update_batch(model, Z, ys):
    """Vectorized ``F(z_p, y_p)`` for a batch of states; rows with zero
    likelihood are left as NaN."""
    pred = Z @ model.T
    post = pred * model.Q[:, ys].T
    with np.errstate(invalid="ignore", divide="ignore"):
        return post / post.sum(axis=1, keepdims=True)
