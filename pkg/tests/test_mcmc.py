import math
import time

import numpy as np
import pytest
from scipy import stats

from loopsoup.graphs import build_named, build_torus
from loopsoup.mcmc import (ChainState, RPMSampler, cy_delete, cy_delete_ok, cy_insert, cy_insert_logratio,
                           dl_delete, dl_delete_logratio, dl_delete_ok, dl_insert, dl_insert_logratio,
                           integrated_autocorr, load_checkpoint, save_checkpoint, validate_stationarity)
from loopsoup.rpm import RpmConfig, extract_cycles, perfect_matchings
from loopsoup.weights import make_weight

EDGE = build_named("single_edge")
PATH3 = build_named("path", n=3)
C4 = build_named("cycle", n=4)
ONE = make_weight("constant")
FACT = make_weight("factorial")


def _dl_ratio(st, e):
    return dl_insert_logratio(e, st.m, st.n, st.eu, st.ev, st.m_cap, st.logU, st.logN, st.logbeta)


def test_double_link_ratios():
    st = ChainState(EDGE, ONE, 2, 1.0, 4)
    assert _dl_ratio(st, 0) == pytest.approx(0.0)
    dl_insert(0, st.m, st.n, st.partner, st.eu, st.ev, st.m_cap)
    assert dl_delete_ok(0, st.m, st.partner, st.m_cap)
    r = dl_delete_logratio(0, st.m, st.n, st.eu, st.ev, st.m_cap, st.logU, st.logN, st.logbeta)
    assert r == pytest.approx(0.0)
    dl_insert(0, st.m, st.n, st.partner, st.eu, st.ev, st.m_cap)
    assert _dl_ratio(st, 0) == -np.inf  # cap reached
    dl_delete(0, st.m, st.n, st.partner, st.eu, st.ev, st.m_cap)
    dl_delete(0, st.m, st.n, st.partner, st.eu, st.ev, st.m_cap)
    assert st.m.sum() == 0 and st.n.sum() == 0 and (st.partner == -1).all()


def test_cycle_move_ratios_and_inverse():
    st = ChainState(C4, ONE, 2, 1.0, 4)
    args = (st.cverts, st.cedges, st.cptr)
    assert len(st.cycles) == 1
    r = cy_insert_logratio(0, *args, st.m, st.n, st.m_cap, st.logU, st.logN, st.logbeta)
    assert math.exp(r) == pytest.approx(2.0)
    # put a double link on edge 0 first so labels and pairings are non-trivial
    dl_insert(0, st.m, st.n, st.partner, st.eu, st.ev, st.m_cap)
    before = st.to_config()
    cy_insert(0, *args, st.m, st.n, st.partner, st.eu, st.m_cap, st.a_buf, st.b_buf)
    w = st.to_config()
    cs = extract_cycles(C4, w)
    assert len(cs) == 2 and {c.loop.alpha for c in cs} == {2, 4}
    assert cy_delete_ok(0, *args, st.m, st.partner, st.eu, st.m_cap, st.a_buf, st.b_buf)
    cy_delete(0, *args, st.m, st.n, st.partner, st.eu, st.m_cap, st.a_buf, st.b_buf)
    assert st.to_config() == before
    z = ChainState(C4, ONE, 2, 0.0, 4)
    assert cy_insert_logratio(0, z.cverts, z.cedges, z.cptr, z.m, z.n, z.m_cap, z.logU, z.logN, z.logbeta) == -np.inf


def test_sampler_rejects_hard_core():
    with pytest.raises(ValueError):
        ChainState(EDGE, make_weight("table", values=[1, 1, 0]), 2, 0.5, 4)


def test_beta_zero_sweeps_stay_empty():
    st = ChainState(C4, ONE, 2, 0.0, 8)
    rng = np.random.default_rng(0)
    for _ in range(200):
        st.sweep(rng)
    assert st.m.sum() == 0


def test_sweeps_preserve_pairing():
    st = ChainState(build_torus(4, 2), FACT, 2, 1.2, 8)
    rng = np.random.default_rng(3)
    for _ in range(300):
        st.sweep(rng)
        w = st.to_config()  # validates the full pairing
        st.check()
        assert all(n == k for n, k in zip(w.n(st.g), st.n))
    stats_ = st.move_stats()
    assert all(v["accepted"] <= v["proposed"] for v in stats_.values())


def _repair_law(N, reps, seed):
    """Empirical law of pi_x after repairs at x, with pi_y = {(0,1), (2,3)}."""
    ends = [(0, l) for l in range(4)]
    py = [((0, 0), (0, 1)), ((0, 2), (0, 3))]
    choices = [RpmConfig.build(EDGE, [4], [px, py]).pairings[0] for px in perfect_matchings(ends)]
    st = ChainState(EDGE, ONE, N, 0.5, 4)
    st.set_config(RpmConfig.build(EDGE, [4], [list(choices[1]), py]))
    rng = np.random.default_rng(seed)
    counts = np.zeros(3, dtype=np.int64)
    for _ in range(reps):
        st.repair(0, rng)
        counts[choices.index(st.to_config().pairings[0])] += 1
    ncyc = [len(extract_cycles(EDGE, RpmConfig.build(EDGE, [4], [list(c), py]))) for c in choices]
    p = np.array([float(N) ** c for c in ncyc])
    return counts, p / p.sum(), ncyc


@pytest.mark.parametrize("N", [1, 2, 4])
def test_repair_conditional_law(N):
    counts, p, ncyc = _repair_law(N, 30_000, N)
    assert sorted(ncyc) == [1, 1, 2]
    assert stats.chisquare(counts, p * counts.sum()).pvalue > 0.01


def test_repair_two_cycle_probability_n2():
    counts, p, ncyc = _repair_law(2, 100_000, 7)
    two = counts[ncyc.index(2)] / counts.sum()
    assert abs(two - 0.5) <= 0.01


@pytest.mark.parametrize("U", [ONE, FACT], ids=str)
@pytest.mark.parametrize("beta", [0.5, 1.0])
def test_stationarity_single_edge(U, beta):
    r = validate_stationarity(EDGE, U, 2, beta, 4)
    assert r.deviation <= 1e-10 and r.irreducible


def test_stationarity_beta_zero():
    r = validate_stationarity(EDGE, ONE, 2, 0.0, 4)
    assert r.deviation == 0.0


def test_stationarity_cycle4():
    r = validate_stationarity(C4, FACT, 3, 0.7, 2)
    assert r.deviation <= 1e-10 and r.irreducible and r.cycle_space_covered


def test_single_edge_long_run_mean():
    chain = RPMSampler(weight=ONE, N=2, beta=0.5, m_cap=20, n_sweeps=40_000, burn_in=1000, seed=5).fit(EDGE).chain_
    from loopsoup.estimators import batch_means

    k = chain.edge_hist @ np.arange(chain.edge_hist.shape[1])
    mean, se, _ = batch_means(k)
    assert abs(mean - 0.25) <= 3 * se


def test_sweep_cost_linear():
    def per_sweep(L):
        st = ChainState(build_torus(L, 2), ONE, 2, 0.3, 16)
        rng = np.random.default_rng(0)
        for _ in range(50):
            st.sweep(rng)
        t = time.perf_counter()
        for _ in range(300):
            st.sweep(rng)
        return (time.perf_counter() - t) / 300

    a, b = per_sweep(4), per_sweep(8)
    # four times the vertices, edges and plaquettes
    assert b / a < 8


def test_reproducible_and_checkpoint(tmp_path):
    a = RPMSampler(weight=FACT, N=2, beta=0.8, m_cap=16, n_sweeps=500, burn_in=50, seed=11).fit(C4).chain_
    b = RPMSampler(weight=FACT, N=2, beta=0.8, m_cap=16, n_sweeps=500, burn_in=50, seed=11).fit(C4).chain_
    assert np.array_equal(a.hist, b.hist) and np.array_equal(a.conn, b.conn)
    st = ChainState(C4, FACT, 2, 0.8, 16)
    rng = np.random.default_rng(1)
    for _ in range(100):
        st.sweep(rng)
    p = tmp_path / "ck.json"
    save_checkpoint(p, st, rng)
    ref = st.to_config()
    for _ in range(50):
        st.sweep(rng)
    after = st.to_config()
    st2 = ChainState(C4, FACT, 2, 0.8, 16)
    rng2 = load_checkpoint(p, st2)
    assert st2.to_config() == ref
    for _ in range(50):
        st2.sweep(rng2)
    assert st2.to_config() == after


def test_sklearn_params():
    s = RPMSampler(beta=0.3)
    assert s.get_params()["beta"] == 0.3
    s.set_params(N=3)
    assert s.N == 3
    with pytest.raises(ValueError):
        RPMSampler(beta=-1).fit(EDGE)


def test_autocorr_iid():
    x = np.random.default_rng(0).normal(size=20_000)
    assert integrated_autocorr(x) < 1.2
