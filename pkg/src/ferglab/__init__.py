"""Nonlinear filters on finite hidden Markov models and numerical checks of
their Wasserstein contraction and ergodicity constants."""

__version__ = "0.1.0"

from .certify import CertificationReport, KrWitness, certify, kr_rank1_search
from .errors import (AtomCapExceeded, ConfigError, DimensionError, FerglabError, LPError,
                     MetricError, StochasticityError, ZeroLikelihood)
from .filtering import (AtomicMeasureOnZ, bayes_update, filter_branches, filter_path,
                        iterate_eta, predictive_obs)
from .metrics import (MetricSpace, birkhoff_coefficients, bl_distance, dobrushin_coefficient,
                      hilbert_metric, mixing_constant, tv_distance, w1_distance)
from .model import (AlphaEstimate, HmmModel, build_truncated_gaussian, estimate_alpha, ex1_model,
                    gaussian_model, load_model)
from .transport import TransportPlan, solve_transport

__all__ = [
    "AlphaEstimate", "AtomCapExceeded", "AtomicMeasureOnZ", "CertificationReport", "ConfigError",
    "DimensionError", "FerglabError", "HmmModel", "KrWitness", "LPError", "MetricError",
    "MetricSpace", "StochasticityError", "TransportPlan", "ZeroLikelihood", "bayes_update",
    "birkhoff_coefficients", "bl_distance", "build_truncated_gaussian", "certify",
    "dobrushin_coefficient", "estimate_alpha", "ex1_model", "filter_branches", "filter_path",
    "gaussian_model", "hilbert_metric", "iterate_eta", "kr_rank1_search", "load_model",
    "mixing_constant", "predictive_obs", "solve_transport", "tv_distance", "w1_distance",
]
