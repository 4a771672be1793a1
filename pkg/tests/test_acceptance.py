"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line (with the measured quantity and
wall time) that is printed in the pytest terminal summary. Run directly with
``python3 tests/test_acceptance.py`` to print the lines without pytest.
"""

import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from ferglab.certify import certify  # noqa: E402
from ferglab.filtering import filter_path  # noqa: E402
from ferglab.metrics import (MetricSpace, birkhoff_coefficients, dobrushin_coefficient,  # noqa: E402
                             dobrushin_partition_bruteforce, hilbert_metric, tv_distance, w1_distance)
from ferglab.model import build_truncated_gaussian, estimate_alpha, ex1_model, gaussian_model, \
    model_from_arrays  # noqa: E402
from ferglab.simulate import (bl_regularity_test, dirichlet_pairs, n_step_decay, occupation_distance,  # noqa: E402
                              one_step_contraction_test, reachable_state_trace, stationary_distribution)
from ferglab.transport import solve_transport  # noqa: E402

from oracles import dobrushin_rowpairs, transport_highs  # noqa: E402

RESULTS = []
BETA_EX1 = 14 / 15


class Criterion:
    def __init__(self, number, title, limit_s):
        self.number, self.title, self.limit = number, title, limit_s

    def __enter__(self):
        self.t0 = time.perf_counter()
        self.checks = []
        return self

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        self.check(elapsed < self.limit, f"{elapsed:.2f}s < {self.limit:g}s")
        if exc_type is not None:
            self.check(False, f"{exc_type.__name__}: {exc}")
        ok = all(c for c, _ in self.checks)
        line = f"[{'PASS' if ok else 'FAIL'}] {self.number:>2}. {self.title}: " + "; ".join(d for _, d in self.checks)
        RESULTS.append(line)
        print(line)
        assert ok, line
        return False


EX1 = ex1_model(0.1)


def test_01_dobrushin():
    with Criterion(1, "Dobrushin coefficient", 1.0) as c:
        d = dobrushin_coefficient(EX1.T)
        c.check(abs(d - 2 / 3) <= 1e-12, f"delta(T)={d:.15f}")
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            n, m = rng.integers(2, 6, size=2)
            K = rng.dirichlet(np.full(m, 0.7), size=n)
            worst = max(worst, abs(dobrushin_coefficient(K) - dobrushin_partition_bruteforce(K)))
        c.check(worst <= 1e-12, f"partition oracle max diff {worst:.1e} on 100 kernels")


def test_02_corollary():
    with Criterion(2, "Finite-state corollary at eps=0.1", 1.0) as c:
        dT, dQ = dobrushin_coefficient(EX1.T), dobrushin_coefficient(EX1.Q)
        c.check(abs(dQ - 0.1) <= 1e-12 and abs(dobrushin_rowpairs(EX1.Q) - 0.1) <= 1e-12, f"delta(Q)={dQ:.12g}")
        value = (1 - dT) * (3 - 2 * dQ)
        c.check(abs(value - BETA_EX1) <= 1e-12 and value < 1, f"(1-dT)(3-2dQ)={value:.12f}")
        r = certify(EX1)
        c.check(r.corollary_finite_pass and abs(r.corollary_value - value) <= 1e-15, "certifier agrees")


def test_03_one_step():
    with Criterion(3, "One-step W1 contraction, ex1, 200 pairs", 30.0) as c:
        res = one_step_contraction_test(EX1, n_pairs=200, seed=0, beta=BETA_EX1, tol=1e-9)
        c.check(res.pairs_tested == 200, f"{res.pairs_tested} pairs")
        c.check(res.passed, f"max ratio {res.max_ratio:.6f} <= beta={BETA_EX1:.6f}")


def test_04_decay():
    with Criterion(4, "Exact geometric decay, n<=5, 20 pairs", 120.0) as c:
        worst_excess, worst_slope = -math.inf, -math.inf
        for z0, z1 in dirichlet_pairs(4, 20, 11):
            curve = n_step_decay(EX1, z0, z1, 5, beta=BETA_EX1, tol=1e-9)
            worst_excess = max(worst_excess, float(np.max(curve.distances - curve.bounds)))
            worst_slope = max(worst_slope, curve.fitted_rate)
        c.check(worst_excess <= 1e-9, f"max (d_n - beta^n d_0) = {worst_excess:.3e}")
        c.check(worst_slope <= math.log(BETA_EX1) + 0.05,
                f"max fitted slope {worst_slope:.3f} <= {math.log(BETA_EX1) + 0.05:.3f}")


def test_05_bl_regularity():
    with Criterion(5, "BL regularity, ex1, n<=4, 50 pairs", 120.0) as c:
        res = bl_regularity_test(EX1, n_max=4, n_pairs=50, seed=0, ground="bl", alpha=2 / 3, tol=1e-9)
        c.check(abs(res.bound - 5.0) <= 1e-12, "bound 3(1+alpha)=5")
        c.check(res.passed and res.pairs_tested == 50, f"max ratio {res.max_ratio:.4f}")


def test_06_hilbert_birkhoff():
    with Criterion(6, "Hilbert/Birkhoff suite", 10.0) as c:
        rng = np.random.default_rng(6)
        worst = -math.inf
        for _ in range(1000):
            n = rng.integers(2, 8)
            mu, nu = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
            worst = max(worst, tv_distance(mu, nu) - 2 / math.log(3) * hilbert_metric(mu, nu))
        c.check(worst <= 1e-12, f"TV - (2/log3) h <= {worst:.3f} on 1000 pairs")
        worst = -math.inf
        for _ in range(20):
            n = rng.integers(2, 7)
            K = rng.random((n, n)) + 0.02
            _, tau = birkhoff_coefficients(K)
            for _ in range(1000):
                mu, nu = rng.random(n) + 1e-3, rng.random(n) + 1e-3
                worst = max(worst, hilbert_metric(mu @ K, nu @ K) - tau * hilbert_metric(mu, nu))
        c.check(worst <= 1e-12, f"h(muK,nuK) - tau h(mu,nu) <= {worst:.2e} on 20x1000")
        H, tau = birkhoff_coefficients([[2 / 3, 1 / 3], [1 / 3, 2 / 3]])
        c.check(abs(tau - 1 / 3) <= 1e-15 and abs(H - math.log(4)) <= 1e-15, f"tau={tau!r}")


def test_07_reachability_identity():
    with Criterion(7, "Constant-column filter equals mu T^k", 1.0) as c:
        Q = np.array([[0.3, 0.7, 0.0], [0.3, 0.0, 0.7], [0.3, 0.35, 0.35], [0.3, 0.7, 0.0]])
        m = model_from_arrays(EX1.T, Q)
        mu = np.array([0.4, 0.1, 0.2, 0.3])
        path = filter_path(m, mu, [0] * 50)
        powers = np.array([mu @ np.linalg.matrix_power(EX1.T, k) for k in range(51)])
        err = float(np.abs(path - powers).max())
        c.check(err <= 1e-12, f"max |F^k - mu T^k| = {err:.1e}")
        tr = reachable_state_trace(m, mu, 0)
        gap = tv_distance(tr.limit, stationary_distribution(EX1.T))
        c.check(gap <= 1e-8, f"TV(limit, pi) = {gap:.1e}")


def test_08_hilbert_rate():
    with Criterion(8, "Hilbert gap rate, Gaussian sigma=1 n=32", 30.0) as c:
        m = gaussian_model(1.0, 32, n_obs=2, floor=0.2)
        tr = reachable_state_trace(m, np.eye(32)[0], 0, second_prior=np.full(32, 1 / 32))
        rate = tr.rate_bound
        c.check(rate is not None and rate < 1, f"c={rate:.6f}")
        mx = float(np.max(tr.ratios))
        c.check(mx <= rate + 1e-6 and not tr.violations, f"max gap ratio {mx:.4f}")
        c.check(tr.prior_gap_tv <= 1e-8, f"prior gap TV {tr.prior_gap_tv:.1e}")


def test_09_gaussian_gate():
    with Criterion(9, "Gaussian gate sigma=1.3", 10.0) as c:
        r = certify(gaussian_model(1.3, 64))
        analytic = math.sqrt(2 / math.pi) / 1.3
        c.check(abs(r.alpha - analytic) <= 1e-15 and r.beta < 1, f"beta={r.beta:.4f} with alpha={r.alpha:.4f}")
        T, space = build_truncated_gaussian(64, 1.3)
        a = estimate_alpha(T, space).alpha
        c.check(a <= analytic + 2 / 64, f"grid alpha {a:.4f} <= {analytic + 2 / 64:.4f}")


def test_10_metric_cross_validation():
    with Criterion(10, "Metric cross-validation", 60.0) as c:
        rng = np.random.default_rng(10)
        s = MetricSpace.discrete(6)
        worst = 0.0
        for _ in range(500):
            p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
            worst = max(worst, abs(w1_distance(p, q, s, method="lp") - tv_distance(p, q) / 2))
        c.check(worst <= 1e-9, f"|W1 - TV/2| <= {worst:.1e} on 500 pairs")
        worst = 0.0
        for _ in range(100):
            a, b = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
            C = rng.random((8, 8))
            worst = max(worst, abs(solve_transport(a, b, C).cost - transport_highs(a, b, C)))
        c.check(worst <= 1e-9, f"generic LP oracle max diff {worst:.1e} on 100 8x8")
        perms = np.array(list(itertools.permutations(range(8))))
        u = np.full(8, 1 / 8)
        worst = 0.0
        for _ in range(100):
            C = rng.random((8, 8))
            brute = C[np.arange(8), perms].sum(axis=1).min() / 8
            worst = max(worst, abs(solve_transport(u, u, C).cost - brute))
        c.check(worst <= 1e-9, f"vertex enumeration max diff {worst:.1e} on 100 8x8")


def test_11_occupation():
    with Criterion(11, "Occupation-measure distance, ex1 delta_0 vs delta_3", 300.0) as c:
        Ns = [250, 500, 1000, 2000]
        res = occupation_distance(EX1, np.eye(4)[0], np.eye(4)[3], Ns, n_paths=500, seed=7, n_boot=200)
        d, se = res.distances, res.stderr
        c.check(d[-1] + 3 * se[-1] < 0.02, f"d(2000)={d[-1]:.2e} +/- {se[-1]:.1e} < 0.02")
        c.check(np.all(np.diff(d) < 0), "decreasing: " + ", ".join(f"{v:.2e}" for v in d))


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
