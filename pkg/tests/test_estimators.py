import math

import numpy as np
import pytest

from loopsoup import estimators as est
from loopsoup import rwls_exact as rx
from loopsoup.graphs import build_named, build_torus
from loopsoup.loops import bounce
from loopsoup.mcmc import RPMSampler
from loopsoup.weights import make_weight

EDGE = build_named("single_edge")
C4 = build_named("cycle", n=4)
ONE = make_weight("constant")
SPIN2 = make_weight("spin", N=2)


@pytest.fixture(scope="module")
def edge_chain():
    return RPMSampler(weight=ONE, N=2, beta=0.5, m_cap=20, n_sweeps=40_000, seed=1).fit(EDGE).chain_


@pytest.fixture(scope="module")
def spin_edge_chain():
    return RPMSampler(weight=SPIN2, N=2, beta=0.5, m_cap=20, n_sweeps=40_000, seed=2).fit(EDGE).chain_


@pytest.fixture(scope="module")
def zero_chain():
    return RPMSampler(weight=SPIN2, N=2, beta=0.0, m_cap=8, n_sweeps=2000, burn_in=100, seed=3).fit(C4).chain_


def _within(r, exact, k=3.0):
    return abs(r.estimate - exact) <= k * r.se


def test_batch_means():
    x = np.random.default_rng(0).normal(size=32_000)
    mean, se, ess = est.batch_means(x)
    assert abs(mean) < 4 * se and se == pytest.approx(1 / math.sqrt(32_000), rel=0.3)
    assert est.batch_means(np.ones(100))[1] == 0.0


def test_single_edge_estimates(edge_chain):
    assert _within(est.estimate_rho(edge_chain, 2), 0.125)
    assert _within(est.micro_localtime_partial(edge_chain, 2), 0.25)
    lt = float(rx.localtime_moment(EDGE, ONE, 2, 0.5, 40, 0, 1).value)
    assert _within(est.estimate_localtime_moments(edge_chain, 0, 1), lt)
    assert _within(est.estimate_connection(edge_chain, 1), 1 - (1 - 0.25))


def test_micro_localtime_monotone(edge_chain):
    vals = [est.micro_localtime_partial(edge_chain, K).estimate for K in range(2, 12)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_beta_zero_estimates(zero_chain):
    assert est.estimate_rho(zero_chain, 2).estimate == 0
    assert est.micro_localtime_partial(zero_chain, 4).estimate == 0
    assert est.estimate_localtime_moments(zero_chain, 0, 2).estimate == 0
    assert est.estimate_connection(zero_chain, 1).estimate == 0
    s = est.spin_correlation_sandwich(zero_chain, 1)
    assert s["middle"] == 0 and s["upper"] == 0 and s["lower"] == 0
    assert all(c.estimate == 0 and c.satisfied for c in est.poisson_tail_check(zero_chain, range(1, 5)))


def test_sandwich_matches_exact(spin_edge_chain):
    s = est.spin_correlation_sandwich(spin_edge_chain, 1)
    exact = float(rx.sandwich_middle(EDGE, SPIN2, 2, 0.5, 40, 0, 1).value)
    assert abs(s["middle"] - exact) <= 3 * s["middle_se"]
    assert s["upper_holds"] and s["lower_holds"]
    conn = float(rx.connection_probability(EDGE, SPIN2, 2, 0.5, 40, 0, 1).value)
    assert abs(s["upper"] - conn / 4) <= 3 * s["upper_se"]


def test_sandwich_rejects_non_spin(edge_chain):
    with pytest.raises(ValueError):
        est.spin_correlation_sandwich(edge_chain, 1)


def test_lambda_value():
    assert rx.lambda_bound(bounce(0, 1), 2) == pytest.approx(math.e)
    assert math.e**6 / math.factorial(6) == pytest.approx(0.5603, abs=1e-3)


def test_connection_vs_exact_on_cycle4():
    # the equivalence covers multiplicities; the connection event is checked here
    U = make_weight("factorial")
    chain = RPMSampler(weight=U, N=2, beta=0.6, m_cap=24, n_sweeps=40_000, seed=4).fit(C4).chain_
    for y in (1, 2):
        r = est.estimate_connection(chain, y)
        exact = float(rx.connection_probability(C4, U, 2, 0.6, 14, 0, y).value)
        assert abs(r.estimate - exact) <= 4 * r.se + 1e-3


def test_decay_fit_synthetic():
    d = np.array([1, 2, 4, 8, 16])
    f = est.fit_decay(d, d**-2.0)
    assert f["c"] == pytest.approx(2.0) and f["ci"][1] - f["ci"][0] == pytest.approx(0.0, abs=1e-9)
    f = est.fit_decay(d, np.full(5, 0.3))
    assert f["c"] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        est.fit_decay(d, np.zeros(5))
    with pytest.raises(ValueError):
        est.fit_decay(d[:3], d[:3] ** -1.0)
    m = est.DecayFit().fit(d, 3 * d**-1.5)
    assert np.allclose(m.predict(d), 3 * d**-1.5)


def test_green_gap():
    r = est.green_gap(64)
    assert r["g_xx"] >= 1
    assert abs(r["gap"][0] - 1) <= 0.02
    assert r["max_residual"] <= 0.05
    col, idx = est.green_column(16)
    assert (col >= 0).all() and col[idx((0, 0))] == col.max()


def test_rho_bound_check_torus():
    chain = RPMSampler(weight=SPIN2, N=2, beta=0.6, m_cap=32, n_sweeps=3000, seed=5).fit(build_torus(4, 2)).chain_
    for k in (2, 4):
        r, check, positive = est.rho_bound_check(chain, k)
        assert check.satisfied and check.bound == pytest.approx(2 * (16 * math.e) ** (k / 2))


def test_localtime_moments_stable_in_beta():
    g = build_torus(4, 2)
    for b in (0.6, 1.2):
        chain = RPMSampler(weight=SPIN2, N=2, beta=b, m_cap=64, n_sweeps=3000, seed=6,
                           obs_vertices=(0, 5)).fit(g).chain_
        assert chain.cap_hit_rate < 0.01
        for m in (1, 2, 4, 8):
            r = est.estimate_localtime_moments(chain, 5, m)
            assert math.isfinite(r.estimate) and math.isfinite(r.se)
