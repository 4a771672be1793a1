"""Hidden Markov models on finite metric spaces and their configuration format.

A model document (JSON, or YAML for hand editing) looks like::

    {
      "schema_version": 1,
      "name": "ex1",
      "metric": {"type": "discrete", "n": 4},
      "T": [["1/3", "1/3", "1/6", "1/6"], ...],
      "Q": {"family": "ex1", "epsilon": 0.1},
      "obs_labels": ["0", "1"],
      "params": {"epsilon": 0.1}
    }

``metric.type`` is ``discrete`` (``n`` or ``points``), ``grid-1d`` (``n``,
optional ``lo``/``hi``) or ``explicit`` (``dist`` and optional ``points``).
Matrix entries may be numbers or fraction strings such as ``"1/6"``.
``T`` may also be ``{"family": "truncated_gaussian", "sigma": s}`` on a
1-D grid; ``Q`` may be a matrix or one of the families ``ex1``
(``epsilon``), ``floor_bins`` (``n_obs``, ``floor``) and ``identity``.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, MetricError
from .metrics import MetricSpace, check_metric, check_stochastic, tv_distance

SCHEMA_VERSION = 1

EX1_T = [
    ["1/3", "1/3", "1/6", "1/6"],
    ["0", "1/2", "1/6", "1/3"],
    ["1/3", "1/6", "1/6", "1/3"],
    ["1/6", "1/3", "1/3", "1/6"],
]


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Finite hidden Markov model: state space, observation labels, ``T`` and ``Q``.

    ``T[i, j]`` is the probability of moving from state ``i`` to ``j``;
    ``Q[j, y]`` the probability of observing ``y`` in state ``j``.
    """

    space: MetricSpace
    obs_labels: tuple
    T: np.ndarray
    Q: np.ndarray
    name: str = "model"
    params: dict = field(default_factory=dict)
    analytic_alpha: float | None = None
    config: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        T = check_stochastic(self.T, name="T").copy()
        Q = check_stochastic(self.Q, name="Q").copy()
        n = self.space.size
        if T.shape != (n, n):
            raise DimensionError(f"T has shape {T.shape}, expected ({n}, {n})")
        if Q.shape[0] != n:
            raise DimensionError(f"Q has {Q.shape[0]} rows, expected {n}")
        labels = tuple(self.obs_labels) if self.obs_labels else tuple(str(y) for y in range(Q.shape[1]))
        if len(labels) != Q.shape[1]:
            raise DimensionError(f"{len(labels)} observation labels for {Q.shape[1]} Q columns")
        T.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "obs_labels", labels)

    @property
    def n_states(self):
        return self.T.shape[0]

    @property
    def n_obs(self):
        return self.Q.shape[1]

    def config_hash(self):
        doc = self.config if self.config is not None else model_to_config(self)
        return config_hash(doc)


@dataclass(frozen=True)
class AlphaEstimate:
    alpha: float
    witness_pair: tuple | None


def estimate_alpha(T, space):
    """Least Lipschitz constant of ``x -> T(.|x)`` from ``(X, d)`` to TV.

    This is ``max_{x != x'} ||T(.|x) - T(.|x')||_TV / d(x, x')``, exact on
    a finite space. A single-point space gives ``alpha = 0``.
    """
    T = np.asarray(T, dtype=float)
    n = T.shape[0]
    if n < 2:
        return AlphaEstimate(0.0, None)
    best, witness = 0.0, None
    for i in range(n - 1):
        tv = np.abs(T[i][None, :] - T[i + 1:]).sum(axis=1)
        ratio = tv / space.dist[i, i + 1:]
        k = int(np.argmax(ratio))
        if witness is None or ratio[k] > best:
            best, witness = float(ratio[k]), (i, i + 1 + k)
    return AlphaEstimate(best, witness)


def truncated_gaussian_alpha(sigma):
    """Upper bound ``sqrt(2/pi) / sigma`` on the TV-Lipschitz constant of
    ``x -> N(x, sigma^2)`` truncated to ``[0, 1]``."""
    return math.sqrt(2.0 / math.pi) / sigma


def build_truncated_gaussian(n_points, sigma, lo=0.0, hi=1.0):
    """Grid discretization of ``T(.|x) = N(x, sigma^2)`` truncated to ``[lo, hi]``.

    Each row is the Gaussian density evaluated at the grid points, times the
    common cell width, renormalized to sum to one (the truncation constant
    and the cell width cancel). The bias of this rule is O(1/n).
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    space = MetricSpace.grid_1d(n_points, lo, hi)
    x = space.coords
    z = (x[None, :] - x[:, None]) / sigma
    T = np.exp(-0.5 * z * z)
    T /= T.sum(axis=1, keepdims=True)
    return T, space


def floor_channel(n_states, n_obs=2, floor=0.2):
    """Observation channel where ``y`` flags which of ``n_obs`` consecutive
    index bins the state lies in, with every likelihood at least ``floor``."""
    if not 0 <= floor * n_obs <= 1:
        raise ValueError("floor * n_obs must lie in [0, 1]")
    bins = (np.arange(n_states) * n_obs) // n_states
    Q = np.full((n_states, n_obs), floor)
    Q[np.arange(n_states), bins] += 1.0 - n_obs * floor
    return Q


def ex1_channel(epsilon):
    e = float(epsilon)
    return np.array([[1.0, 0.0], [1 - e, e], [e, 1 - e], [e, 1 - e]])


def ex1_config(epsilon=0.1):
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "ex1",
        "metric": {"type": "discrete", "n": 4},
        "T": EX1_T,
        "Q": {"family": "ex1", "epsilon": epsilon},
        "obs_labels": ["0", "1"],
        "params": {"epsilon": epsilon},
    }


def gaussian_config(sigma=1.3, n_points=64, n_obs=2, floor=0.2):
    return {
        "schema_version": SCHEMA_VERSION,
        "name": f"gaussian_sigma{sigma:g}",
        "metric": {"type": "grid-1d", "n": n_points, "lo": 0.0, "hi": 1.0},
        "T": {"family": "truncated_gaussian", "sigma": sigma},
        "Q": {"family": "floor_bins", "n_obs": n_obs, "floor": floor},
        "obs_labels": [str(y) for y in range(n_obs)],
        "params": {"sigma": sigma},
    }


def ex1_model(epsilon=0.1):
    return load_model(ex1_config(epsilon))


def gaussian_model(sigma=1.3, n_points=64, n_obs=2, floor=0.2):
    return load_model(gaussian_config(sigma, n_points, n_obs, floor))


def config_hash(doc):
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _number(v, where):
    if isinstance(v, bool):
        raise ConfigError(f"{where}: boolean is not a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{where}: cannot parse {v!r} as a number") from exc
    raise ConfigError(f"{where}: expected a number, got {type(v).__name__}")


def _matrix(rows, where):
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError(f"{where}: expected a non-empty list of rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"{where}: rows have different lengths {sorted(widths)}")
    return np.array([[_number(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)]
                     for i, r in enumerate(rows)])


def _space(spec):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("metric: expected an object with a 'type' field")
    kind = spec["type"]
    if kind == "discrete":
        if "points" in spec:
            return MetricSpace.discrete(list(spec["points"]))
        if "n" in spec:
            return MetricSpace.discrete(int(spec["n"]))
        raise ConfigError("metric: discrete metric needs 'n' or 'points'")
    if kind == "grid-1d":
        n = spec.get("n")
        if not isinstance(n, int) or n < 2:
            raise ConfigError("metric: grid-1d needs an integer 'n' >= 2")
        return MetricSpace.grid_1d(n, _number(spec.get("lo", 0.0), "metric.lo"),
                                   _number(spec.get("hi", 1.0), "metric.hi"))
    if kind == "explicit":
        if "dist" not in spec:
            raise ConfigError("metric: explicit metric needs 'dist'")
        d = _matrix(spec["dist"], "metric.dist")
        check_metric(d)
        return MetricSpace.from_matrix(d, spec.get("points"), validate=False)
    raise ConfigError(f"metric: unknown type {kind!r}")


def load_model(config):
    """Build a validated :class:`HmmModel` from a config document (dict) or a
    path to a ``.json`` / ``.yaml`` file."""
    if isinstance(config, (str, Path)):
        return load_model_file(config)
    if not isinstance(config, dict):
        raise ConfigError("model config must be an object")
    version = config.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    for key in ("metric", "T", "Q"):
        if key not in config:
            raise ConfigError(f"missing required field {key!r}")
    try:
        space = _space(config["metric"])
    except MetricError as exc:
        raise ConfigError(f"metric: {exc}") from exc
    n = space.size
    params = dict(config.get("params", {}))

    analytic_alpha = None
    tspec = config["T"]
    if isinstance(tspec, dict):
        family = tspec.get("family")
        if family != "truncated_gaussian":
            raise ConfigError(f"T: unknown family {family!r}")
        if space.kind != "grid-1d":
            raise ConfigError("T: truncated_gaussian requires a grid-1d metric")
        sigma = _number(tspec.get("sigma"), "T.sigma")
        if sigma <= 0:
            raise ConfigError("T: sigma must be positive")
        T, _ = build_truncated_gaussian(n, sigma, space.coords[0], space.coords[-1])
        params.setdefault("sigma", sigma)
        if space.coords[0] == 0.0 and space.coords[-1] == 1.0:
            analytic_alpha = truncated_gaussian_alpha(sigma)
    else:
        T = _matrix(tspec, "T")

    qspec = config["Q"]
    if isinstance(qspec, dict):
        family = qspec.get("family")
        if family == "ex1":
            if n != 4:
                raise ConfigError("Q: the ex1 channel needs 4 states")
            eps = _number(qspec.get("epsilon"), "Q.epsilon")
            if not 0 <= eps <= 1:
                raise ConfigError("Q: epsilon must lie in [0, 1]")
            Q = ex1_channel(eps)
        elif family == "floor_bins":
            try:
                Q = floor_channel(n, int(qspec.get("n_obs", 2)), _number(qspec.get("floor", 0.2), "Q.floor"))
            except ValueError as exc:
                raise ConfigError(f"Q: {exc}") from exc
        elif family == "identity":
            Q = np.eye(n)
        else:
            raise ConfigError(f"Q: unknown family {family!r}")
    else:
        Q = _matrix(qspec, "Q")

    return HmmModel(space=space, obs_labels=tuple(config.get("obs_labels") or ()), T=T, Q=Q,
                    name=str(config.get("name", "model")), params=params,
                    analytic_alpha=analytic_alpha, config=config)


def load_model_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml
            doc = yaml.safe_load(text)
        else:
            doc = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    return load_model(doc)


def model_to_config(model):
    """Canonical JSON-ready document for a model built in code."""
    space = model.space
    if space.kind == "discrete":
        metric = {"type": "discrete", "points": list(space.points)}
    elif space.kind == "grid-1d":
        metric = {"type": "grid-1d", "n": space.size,
                  "lo": float(space.coords[0]), "hi": float(space.coords[-1])}
    else:
        metric = {"type": "explicit", "points": list(space.points), "dist": space.dist.tolist()}
    return {
        "schema_version": SCHEMA_VERSION,
        "name": model.name,
        "metric": metric,
        "T": model.T.tolist(),
        "Q": model.Q.tolist(),
        "obs_labels": list(model.obs_labels),
        "params": dict(model.params),
    }


def model_from_arrays(T, Q, space=None, name="model", obs_labels=()):
    """Convenience constructor; defaults to the discrete metric."""
    T = np.asarray(T, dtype=float)
    if space is None:
        space = MetricSpace.discrete(T.shape[0])
    return HmmModel(space=space, obs_labels=tuple(obs_labels), T=T, Q=np.asarray(Q, dtype=float), name=name)
