import math

import numpy as np
import pytest

from ferglab.certify import (beta_constant, certify, clm_rate, kr_rank1_search, observation_matrices)
from ferglab.metrics import dobrushin_coefficient
from ferglab.model import ex1_model, gaussian_model, model_from_arrays

from oracles import dobrushin_rowpairs

# (1 - 2/3) * (3 - 2 * 0.1)
COROLLARY_EX1 = 14 / 15


def test_ex1_report(ex1):
    r = certify(ex1)
    assert r.delta_T == pytest.approx(2 / 3, abs=1e-12)
    assert r.delta_Q == pytest.approx(0.1, abs=1e-12)
    assert r.alpha == pytest.approx(2 / 3, abs=1e-12)
    assert r.D == 1.0
    assert r.beta == pytest.approx(COROLLARY_EX1, abs=1e-12)
    assert r.corollary_value == pytest.approx(COROLLARY_EX1, abs=1e-12)
    assert r.assumption1_pass and r.corollary_finite_pass
    assert not r.nondegenerate
    assert r.mixing is None and r.clm_rate_c is None
    assert r.obs_floor == (0, pytest.approx(0.1))


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.1, 0.3, 0.5])
def test_delta_q_equals_eps_by_row_pairs(eps):
    m = ex1_model(eps)
    assert dobrushin_coefficient(m.Q) == pytest.approx(eps, abs=1e-12)
    assert dobrushin_rowpairs(m.Q) == pytest.approx(eps, abs=1e-12)


def test_beta_equals_corollary_value_on_finite_spaces():
    # under the discrete metric alpha = max row TV = 2 (1 - delta_T) and D = 1
    rng = np.random.default_rng(3)
    for _ in range(20):
        T = rng.dirichlet(np.ones(4), size=4)
        Q = rng.dirichlet(np.ones(3), size=4)
        r = certify(model_from_arrays(T, Q))
        assert r.alpha == pytest.approx(2 * (1 - r.delta_T), abs=1e-12)
        assert r.beta == pytest.approx(r.corollary_value, abs=1e-12)


def test_gaussian_gate():
    assert 1.3 > 3 / math.sqrt(2 * math.pi)
    r = certify(gaussian_model(1.3, 64))
    assert r.alpha == pytest.approx(math.sqrt(2 / math.pi) / 1.3, abs=1e-15)
    assert r.alpha_analytic == r.alpha
    assert r.alpha_grid <= r.alpha_analytic + 2 / 64
    assert r.beta < 1 and r.assumption1_pass
    assert r.corollary_value is None
    assert r.mixing is not None and r.clm_rate_c is not None and r.clm_rate_c < 1


def test_gaussian_below_threshold_fails_gate():
    r = certify(gaussian_model(0.5, 64))
    assert r.beta > 1 and not r.assumption1_pass


def test_identity_channel_is_degenerate(ex1):
    r = certify(model_from_arrays(ex1.T, np.eye(4)))
    assert not r.nondegenerate
    assert r.delta_Q == 0.0


def test_constant_column_detected(ex1):
    Q = np.array([[0.3, 0.7, 0.0], [0.3, 0.0, 0.7], [0.3, 0.35, 0.35], [0.3, 0.7, 0.0]])
    r = certify(model_from_arrays(ex1.T, Q))
    assert r.constant_obs == (0, pytest.approx(0.3))
    assert r.checks()["positive_eq"]


def test_helpers():
    assert beta_constant(2 / 3, 1.0, 0.1) == pytest.approx(14 / 15)
    assert clm_rate(1.0, 1.0) == 0.0
    assert clm_rate(0.5, 0.2) == pytest.approx(0.95 / 1.05)


def test_observation_matrices_sum_to_T(ex1):
    assert np.allclose(sum(observation_matrices(ex1)), ex1.T)


def test_kr_rank_one_rows():
    T = np.tile([0.2, 0.3, 0.5], (3, 1))
    w = kr_rank1_search(model_from_arrays(T, [[0.5, 0.5], [0.9, 0.1], [0.2, 0.8]]), 3)
    assert w is not None and len(w.observation_string) == 1


def test_kr_identity_channel_positive_T():
    rng = np.random.default_rng(0)
    T = rng.dirichlet(np.ones(3), size=3)
    w = kr_rank1_search(model_from_arrays(T, np.eye(3)), 3)
    assert w is not None and w.observation_string == (0,)
    assert np.linalg.matrix_rank(w.matrix) == 1


def test_kr_ex1_depth12_recorded(ex1):
    r = certify(ex1, kr_depth=12)
    # no ground truth: the outcome is only recorded
    assert r.kr_rank1 is None or r.kr_rank1.second_singular_value < 1e-8
    assert r.to_dict()["checks"]["kr"] == (r.kr_rank1 is not None)


def test_report_serializes(ex1):
    d = certify(gaussian_model(1.0, 16)).to_dict()
    assert set(d["checks"]) == {"assumption1", "corollary", "nondegenerate", "mixing", "positive_eq", "kr"}
    assert isinstance(d["mixing"]["lambda"], list)
