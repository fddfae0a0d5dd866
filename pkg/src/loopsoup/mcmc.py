"""Markov chain on fully paired path-model configurations.

Moves: heat-bath re-pairing at a vertex (Ewens construction), insertion or
deletion of a double link on an edge, and insertion or deletion of one link
per edge around a short simple cycle.  Insertions use top labels and
deletions only remove top labels, so each insertion/deletion pair is a
deterministic inverse and Metropolis acceptance with the exact weight ratio
gives detailed balance.

Array layout: link ``(e, l)`` has id ``e * m_cap + l``; its end at the lower
endpoint of ``e`` is ``2 * id`` and at the upper endpoint ``2 * id + 1``.
``partner[end]`` is the end it is paired with (at the same vertex).
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from .ewens import _sample_into, cycle_count, ewens_normalizer
from .graphs import CycleList, Graph, enumerate_cycles, merge_cycle_lists, winding_cycles
from .rpm import RpmConfig, enumerate_configs, rpm_weight
from .weights import WeightFunction

NEG_INF = -np.inf

# move-type indices for the counters
REPAIR, DL_INS, DL_DEL, CY_INS, CY_DEL = 0, 1, 2, 3, 4
MOVE_NAMES = ("repair", "double_insert", "double_delete", "cycle_insert", "cycle_delete")


# -- numba cores ------------------------------------------------------------


@njit(cache=True, inline="always")
def _vertex_of_end(end, eu, ev, m_cap):
    e = (end >> 1) // m_cap
    return eu[e] if (end & 1) == 0 else ev[e]


@njit(cache=True)
def dl_insert_logratio(e, m, n, eu, ev, m_cap, logU, logN, logbeta):
    me = m[e]
    if me + 2 > m_cap:
        return NEG_INF
    u, v = eu[e], ev[e]
    r = logN + 2.0 * logbeta - math.log(me + 1.0) - math.log(me + 2.0)
    r += logU[n[u] + 1] - logU[n[u]] + logU[n[v] + 1] - logU[n[v]]
    return r


@njit(cache=True)
def dl_insert(e, m, n, partner, eu, ev, m_cap):
    l1 = e * m_cap + m[e]
    l2 = l1 + 1
    partner[2 * l1] = 2 * l2
    partner[2 * l2] = 2 * l1
    partner[2 * l1 + 1] = 2 * l2 + 1
    partner[2 * l2 + 1] = 2 * l1 + 1
    m[e] += 2
    n[eu[e]] += 1
    n[ev[e]] += 1


@njit(cache=True)
def dl_delete_ok(e, m, partner, m_cap):
    if m[e] < 2:
        return False
    l1 = e * m_cap + m[e] - 2
    l2 = l1 + 1
    return partner[2 * l1] == 2 * l2 and partner[2 * l1 + 1] == 2 * l2 + 1


@njit(cache=True)
def dl_delete_logratio(e, m, n, eu, ev, m_cap, logU, logN, logbeta):
    me = m[e]
    u, v = eu[e], ev[e]
    r = logN + 2.0 * logbeta - math.log(me - 1.0) - math.log(me * 1.0)
    r += logU[n[u]] - logU[n[u] - 1] + logU[n[v]] - logU[n[v] - 1]
    return -r


@njit(cache=True)
def dl_delete(e, m, n, partner, eu, ev, m_cap):
    l1 = e * m_cap + m[e] - 2
    for end in range(2 * l1, 2 * l1 + 4):
        partner[end] = -1
    m[e] -= 2
    n[eu[e]] -= 1
    n[ev[e]] -= 1


@njit(cache=True)
def _cycle_ends(c, cverts, cedges, cptr, m, eu, m_cap, top, a_out, b_out):
    # a_i: end of link i at v_i, b_i: end at v_{i+1}; top=True uses the current
    # top link, otherwise the next free label
    k = cptr[c + 1] - cptr[c]
    for i in range(k):
        e = cedges[cptr[c] + i]
        lab = m[e] - 1 if top else m[e]
        link = e * m_cap + lab
        s = 0 if eu[e] == cverts[cptr[c] + i] else 1
        a_out[i] = 2 * link + s
        b_out[i] = 2 * link + 1 - s
    return k


@njit(cache=True)
def cy_insert_logratio(c, cverts, cedges, cptr, m, n, m_cap, logU, logN, logbeta):
    r = logN
    for i in range(cptr[c], cptr[c + 1]):
        e = cedges[i]
        if m[e] + 1 > m_cap:
            return NEG_INF
        r += logbeta - math.log(m[e] + 1.0)
        x = cverts[i]
        r += logU[n[x] + 1] - logU[n[x]]
    return r


@njit(cache=True)
def cy_insert(c, cverts, cedges, cptr, m, n, partner, eu, m_cap, a, b):
    k = _cycle_ends(c, cverts, cedges, cptr, m, eu, m_cap, False, a, b)
    for i in range(k):
        prev = b[(i - 1) % k]
        partner[prev] = a[i]
        partner[a[i]] = prev
    for i in range(cptr[c], cptr[c + 1]):
        m[cedges[i]] += 1
        n[cverts[i]] += 1


@njit(cache=True)
def cy_delete_ok(c, cverts, cedges, cptr, m, partner, eu, m_cap, a, b):
    for i in range(cptr[c], cptr[c + 1]):
        if m[cedges[i]] < 1:
            return False
    k = _cycle_ends(c, cverts, cedges, cptr, m, eu, m_cap, True, a, b)
    for i in range(k):
        if partner[b[(i - 1) % k]] != a[i]:
            return False
    return True


@njit(cache=True)
def cy_delete_logratio(c, cverts, cedges, cptr, m, n, m_cap, logU, logN, logbeta):
    r = logN
    for i in range(cptr[c], cptr[c + 1]):
        e = cedges[i]
        r += logbeta - math.log(m[e] * 1.0)
        x = cverts[i]
        r += logU[n[x]] - logU[n[x] - 1]
    return -r


@njit(cache=True)
def cy_delete(c, cverts, cedges, cptr, m, n, partner, eu, m_cap, a, b):
    k = _cycle_ends(c, cverts, cedges, cptr, m, eu, m_cap, True, a, b)
    for i in range(k):
        partner[a[i]] = -1
        partner[b[i]] = -1
    for i in range(cptr[c], cptr[c + 1]):
        m[cedges[i]] -= 1
        n[cverts[i]] -= 1


@njit(cache=True)
def repair_strands(x, m, partner, eu, ev, m_cap, inc_ptr, inc_edge, inc_side, stamp, tick, s_out, t_out):
    """Half-loops at x: pairs (s, t) of ends at x joined through the rest of the configuration."""
    ns = 0
    for j in range(inc_ptr[x], inc_ptr[x + 1]):
        e = inc_edge[j]
        side = inc_side[j]
        for l in range(m[e]):
            s = 2 * (e * m_cap + l) + side
            if stamp[s] == tick:
                continue
            t = s ^ 1
            while _vertex_of_end(t, eu, ev, m_cap) != x:
                t = partner[t] ^ 1
            stamp[s] = tick
            stamp[t] = tick
            s_out[ns] = s
            t_out[ns] = t
            ns += 1
    return ns


@njit(cache=True)
def repair_apply(ns, s_arr, t_arr, flip, sigma, partner):
    """Orient strand i as (out, in) = (s, t), swapped when flip[i]; pair in_i with out_sigma(i)."""
    for i in range(ns):
        j = sigma[i]
        in_i = s_arr[i] if flip[i] else t_arr[i]
        out_j = t_arr[j] if flip[j] else s_arr[j]
        partner[in_i] = out_j
        partner[out_j] = in_i


@njit(cache=True)
def _sweep(rng, m, n, partner, eu, ev, m_cap, inc_ptr, inc_edge, inc_side,
           cverts, cedges, cptr, logU, logN, logbeta, theta,
           stamp, tick, s_buf, t_buf, flip, sigma, a_buf, b_buf, stats, cap_hits):
    V = n.shape[0]
    E = m.shape[0]
    C = cptr.shape[0] - 1
    for x in range(V):
        if n[x] == 0:
            continue
        tick += 1
        ns = repair_strands(x, m, partner, eu, ev, m_cap, inc_ptr, inc_edge, inc_side, stamp, tick, s_buf, t_buf)
        for i in range(ns):
            flip[i] = rng.random() < 0.5
        _sample_into(theta, ns, rng, sigma)
        repair_apply(ns, s_buf, t_buf, flip, sigma, partner)
        stats[REPAIR, 0] += 1
        stats[REPAIR, 1] += 1
    for e in range(E):
        if rng.random() < 0.5:
            stats[DL_INS, 0] += 1
            if m[e] + 2 > m_cap:
                cap_hits[0] += 1
                continue
            r = dl_insert_logratio(e, m, n, eu, ev, m_cap, logU, logN, logbeta)
            if r >= 0.0 or rng.random() < math.exp(r):
                dl_insert(e, m, n, partner, eu, ev, m_cap)
                stats[DL_INS, 1] += 1
        else:
            stats[DL_DEL, 0] += 1
            if dl_delete_ok(e, m, partner, m_cap):
                r = dl_delete_logratio(e, m, n, eu, ev, m_cap, logU, logN, logbeta)
                if r >= 0.0 or rng.random() < math.exp(r):
                    dl_delete(e, m, n, partner, eu, ev, m_cap)
                    stats[DL_DEL, 1] += 1
    for c in range(C):
        if rng.random() < 0.5:
            stats[CY_INS, 0] += 1
            r = cy_insert_logratio(c, cverts, cedges, cptr, m, n, m_cap, logU, logN, logbeta)
            if r == NEG_INF:
                for i in range(cptr[c], cptr[c + 1]):
                    if m[cedges[i]] + 1 > m_cap:
                        cap_hits[0] += 1
                        break
                continue
            if r >= 0.0 or rng.random() < math.exp(r):
                cy_insert(c, cverts, cedges, cptr, m, n, partner, eu, m_cap, a_buf, b_buf)
                stats[CY_INS, 1] += 1
        else:
            stats[CY_DEL, 0] += 1
            if cy_delete_ok(c, cverts, cedges, cptr, m, partner, eu, m_cap, a_buf, b_buf):
                r = cy_delete_logratio(c, cverts, cedges, cptr, m, n, m_cap, logU, logN, logbeta)
                if r >= 0.0 or rng.random() < math.exp(r):
                    cy_delete(c, cverts, cedges, cptr, m, n, partner, eu, m_cap, a_buf, b_buf)
                    stats[CY_DEL, 1] += 1
    return tick


@njit(cache=True)
def _measure(m, n, partner, eu, ev, m_cap, link_cycle, slot_cyc, slot_cnt, nslot,
             hist, edge_hist, dl_edge, pair_x, pair_y, pair_group, half, conn, mid, n_groups_pairs):
    """Cycle statistics of the current state.

    Fills the cycle-length histogram, the histogram of double-link counts over
    edges, and per pair-group the fraction of pairs joined by a cycle and the
    mean of sum_c n_x(c) n_y(c) / ((n_x + N/2)(n_y + N/2)).  Returns the
    number of cycles.
    """
    E = m.shape[0]
    V = n.shape[0]
    kmax = hist.shape[0] - 1
    for x in range(V):
        nslot[x] = 0
    for i in range(hist.shape[0]):
        hist[i] = 0
    for i in range(edge_hist.shape[0]):
        edge_hist[i] = 0
    for e in range(E):
        dl_edge[e] = 0
    ncyc = 0
    for e in range(E):
        for l in range(m[e]):
            link_cycle[e * m_cap + l] = -1
    for e in range(E):
        for l in range(m[e]):
            start = e * m_cap + l
            if link_cycle[start] >= 0:
                continue
            cid = ncyc
            ncyc += 1
            length = 0
            cur = 2 * start
            while True:
                link_cycle[cur >> 1] = cid
                length += 1
                far = cur ^ 1
                y = _vertex_of_end(far, eu, ev, m_cap)
                k = nslot[y]
                if k > 0 and slot_cyc[y, k - 1] == cid:
                    slot_cnt[y, k - 1] += 1
                else:
                    slot_cyc[y, k] = cid
                    slot_cnt[y, k] = 1
                    nslot[y] = k + 1
                nxt = partner[far]
                if nxt == 2 * start:
                    break
                cur = nxt
            hist[min(length, kmax)] += 1
            if length == 2:
                dl_edge[e] += 1
    kemax = edge_hist.shape[0] - 1
    for e in range(E):
        edge_hist[min(dl_edge[e], kemax)] += 1
    for g in range(conn.shape[0]):
        conn[g] = 0.0
        mid[g] = 0.0
    for p in range(pair_x.shape[0]):
        x = pair_x[p]
        y = pair_y[p]
        g = pair_group[p]
        joined = False
        s = 0.0
        for i in range(nslot[x]):
            for j in range(nslot[y]):
                if slot_cyc[x, i] == slot_cyc[y, j]:
                    joined = True
                    s += slot_cnt[x, i] * slot_cnt[y, j]
        if joined:
            conn[g] += 1.0
            mid[g] += s / ((n[x] + half) * (n[y] + half))
    for g in range(conn.shape[0]):
        conn[g] /= n_groups_pairs[g]
        mid[g] /= n_groups_pairs[g]
    return ncyc


# -- Python side ----------------------------------------------------------------


def _cycle_arrays(cycles: CycleList):
    verts, edges, ptr = [], [], [0]
    for c in cycles:
        verts.extend(c.vertices)
        edges.extend(c.edges)
        ptr.append(len(verts))
    return (np.array(verts, dtype=np.int64), np.array(edges, dtype=np.int64), np.array(ptr, dtype=np.int64))


def default_cycles(g: Graph, max_len: int = 4) -> CycleList:
    """Short simple cycles, plus straight winding cycles on tori."""
    cl = enumerate_cycles(g, max_len) if max_len >= 3 else CycleList((), max_len)
    if g.periodic:
        cl = merge_cycle_lists(cl, winding_cycles(g))
    return cl


def default_pairs(g: Graph):
    """Pair groups for connection estimates.

    Tori: for each distance d = 1..L/2 along the first axis, all translates of
    (x, x + d e_1).  Other graphs: (0, y) for every y != 0.
    """
    if g.periodic:
        L = g.shape[0]
        groups = {}
        for d in range(1, L // 2 + 1):
            pairs = []
            for x in g.vertices:
                c = list(g.coords(x))
                c[0] += d
                pairs.append((x, g.vertex_at(c)))
            groups[d] = pairs
        return groups
    return {y: [(0, y)] for y in range(1, g.n_vertices)}


class ChainState:
    """Arrays of one chain plus the static tables the moves need."""

    def __init__(self, g: Graph, U: WeightFunction, N, beta, m_cap: int, cycles: CycleList | None = None):
        if not U.positive:
            raise ValueError("the sampler needs a strictly positive weight function")
        if N <= 0 or beta < 0:
            raise ValueError("need N > 0 and beta >= 0")
        if m_cap < 2:
            raise ValueError(f"m_cap must be >= 2, got {m_cap}")
        self.g, self.U, self.N, self.beta, self.m_cap = g, U, float(N), float(beta), int(m_cap)
        self.cycles = default_cycles(g) if cycles is None else cycles
        E, V = g.n_edges, g.n_vertices
        self.eu = np.array([u for u, _ in g.edges], dtype=np.int64)
        self.ev = np.array([v for _, v in g.edges], dtype=np.int64)
        inc_ptr, inc_edge, inc_side = [0], [], []
        for x in g.vertices:
            for _, e in g.adjacency[x]:
                inc_edge.append(e)
                inc_side.append(0 if g.edges[e][0] == x else 1)
            inc_ptr.append(len(inc_edge))
        self.inc_ptr = np.array(inc_ptr, dtype=np.int64)
        self.inc_edge = np.array(inc_edge, dtype=np.int64)
        self.inc_side = np.array(inc_side, dtype=np.int64)
        self.cverts, self.cedges, self.cptr = _cycle_arrays(self.cycles)
        n_max = g.max_degree * self.m_cap // 2 + 2
        self.logU = U.log_values(n_max)
        self.logN = math.log(self.N)
        self.logbeta = math.log(self.beta) if self.beta > 0 else NEG_INF
        self.theta = self.N / 2
        self.m = np.zeros(E, dtype=np.int64)
        self.n = np.zeros(V, dtype=np.int64)
        self.partner = np.full(2 * E * self.m_cap, -1, dtype=np.int64)
        self.stamp = np.zeros(2 * E * self.m_cap, dtype=np.int64)
        self.tick = 0
        nbuf = n_max + 1
        self.s_buf = np.zeros(nbuf, dtype=np.int64)
        self.t_buf = np.zeros(nbuf, dtype=np.int64)
        self.flip = np.zeros(nbuf, dtype=np.bool_)
        self.sigma = np.zeros(nbuf, dtype=np.int64)
        klen = max((len(c) for c in self.cycles), default=1)
        self.a_buf = np.zeros(klen, dtype=np.int64)
        self.b_buf = np.zeros(klen, dtype=np.int64)
        self.stats = np.zeros((5, 2), dtype=np.int64)
        self.cap_hits = np.zeros(1, dtype=np.int64)
        self.sweeps = 0

    # conversions

    def to_config(self) -> RpmConfig:
        g, mc = self.g, self.m_cap
        pairs = [[] for _ in g.vertices]
        for e, (u, v) in enumerate(g.edges):
            for l in range(self.m[e]):
                for side, x in ((0, u), (1, v)):
                    end = 2 * (e * mc + l) + side
                    p = int(self.partner[end])
                    if end < p:
                        pl = p >> 1
                        pairs[x].append(((e, l), (pl // mc, pl % mc)))
        return RpmConfig.build(g, self.m, pairs)

    def set_config(self, w: RpmConfig) -> None:
        g, mc = self.g, self.m_cap
        if max(w.m, default=0) > mc:
            raise ValueError("configuration exceeds m_cap")
        self.m[:] = w.m
        self.n[:] = w.n(g)
        self.partner[:] = -1
        for x in g.vertices:
            for a, b in w.pairings[x]:
                ea, eb = self._end(a, x), self._end(b, x)
                self.partner[ea] = eb
                self.partner[eb] = ea

    def _end(self, link, x):
        e, l = link
        side = 0 if self.g.edges[e][0] == x else 1
        return 2 * (e * self.m_cap + l) + side

    # single moves with explicit randomness, shared by sweeps and kernels

    def strands(self, x):
        self.tick += 1
        ns = repair_strands(x, self.m, self.partner, self.eu, self.ev, self.m_cap, self.inc_ptr,
                            self.inc_edge, self.inc_side, self.stamp, self.tick, self.s_buf, self.t_buf)
        return ns, self.s_buf[:ns].copy(), self.t_buf[:ns].copy()

    def repair(self, x, rng):
        ns, s, t = self.strands(x)
        if ns == 0:
            return
        flip = rng.random(ns) < 0.5
        sigma = np.zeros(ns, dtype=np.int64)
        _sample_into(self.theta, ns, rng, sigma)
        repair_apply(ns, s, t, flip, sigma, self.partner)

    def sweep(self, rng) -> None:
        self.tick = _sweep(rng, self.m, self.n, self.partner, self.eu, self.ev, self.m_cap, self.inc_ptr,
                           self.inc_edge, self.inc_side, self.cverts, self.cedges, self.cptr, self.logU,
                           self.logN, self.logbeta, self.theta, self.stamp, self.tick, self.s_buf,
                           self.t_buf, self.flip, self.sigma, self.a_buf, self.b_buf, self.stats, self.cap_hits)
        self.sweeps += 1

    def check(self) -> None:
        """Full recomputation of the derived data (debug aid)."""
        w = self.to_config()
        if list(w.n(self.g)) != list(self.n):
            raise AssertionError("local times out of sync with links")

    def move_stats(self) -> dict:
        return {name: {"proposed": int(self.stats[i, 0]), "accepted": int(self.stats[i, 1])}
                for i, name in enumerate(MOVE_NAMES)}




# -- exact one-sweep kernel on tiny spaces ---------------------------------------


def _move_kernels(state: ChainState, states: list[RpmConfig]):
    """Transition matrices of every move in sweep order."""
    index = {w: i for i, w in enumerate(states)}
    S = len(states)
    g = state.g
    mats = []

    def run(fn):
        P = np.zeros((S, S))
        for i, w in enumerate(states):
            for prob, w2 in fn(w):
                if prob == 0:
                    continue
                if w2 not in index:
                    raise AssertionError("move left the enumerated space")
                P[i, index[w2]] += prob
        mats.append(P)

    theta = state.theta
    for x in g.vertices:
        def repair_outcomes(w, x=x):
            state.set_config(w)
            if state.n[x] == 0:
                return [(1.0, w)]
            ns, s, t = state.strands(x)
            Z = ewens_normalizer(theta, ns)
            out = []
            for flips in itertools.product((False, True), repeat=ns):
                for perm in itertools.permutations(range(ns)):
                    state.set_config(w)
                    sigma = np.array(perm, dtype=np.int64)
                    repair_apply(ns, s, t, np.array(flips), sigma, state.partner)
                    p = 0.5**ns * theta ** cycle_count(perm) / Z
                    out.append((p, state.to_config()))
            return out
        run(repair_outcomes)

    def acc(logr):
        return 1.0 if logr >= 0 else math.exp(logr)

    for e in range(g.n_edges):
        def dl_outcomes(w, e=e):
            out = []
            state.set_config(w)
            r = dl_insert_logratio(e, state.m, state.n, state.eu, state.ev, state.m_cap, state.logU, state.logN, state.logbeta)
            a = 0.0 if r == NEG_INF else acc(r)
            if a > 0:
                dl_insert(e, state.m, state.n, state.partner, state.eu, state.ev, state.m_cap)
                out.append((0.5 * a, state.to_config()))
            out.append((0.5 * (1 - a), w))
            state.set_config(w)
            if dl_delete_ok(e, state.m, state.partner, state.m_cap):
                a = acc(dl_delete_logratio(e, state.m, state.n, state.eu, state.ev, state.m_cap, state.logU, state.logN, state.logbeta))
                dl_delete(e, state.m, state.n, state.partner, state.eu, state.ev, state.m_cap)
                out.append((0.5 * a, state.to_config()))
                out.append((0.5 * (1 - a), w))
            else:
                out.append((0.5, w))
            return out
        run(dl_outcomes)

    for c in range(len(state.cycles)):
        def cy_outcomes(w, c=c):
            out = []
            st = state
            st.set_config(w)
            r = cy_insert_logratio(c, st.cverts, st.cedges, st.cptr, st.m, st.n, st.m_cap, st.logU, st.logN, st.logbeta)
            a = 0.0 if r == NEG_INF else acc(r)
            if a > 0:
                cy_insert(c, st.cverts, st.cedges, st.cptr, st.m, st.n, st.partner, st.eu, st.m_cap, st.a_buf, st.b_buf)
                out.append((0.5 * a, st.to_config()))
            out.append((0.5 * (1 - a), w))
            st.set_config(w)
            if cy_delete_ok(c, st.cverts, st.cedges, st.cptr, st.m, st.partner, st.eu, st.m_cap, st.a_buf, st.b_buf):
                a = acc(cy_delete_logratio(c, st.cverts, st.cedges, st.cptr, st.m, st.n, st.m_cap, st.logU, st.logN, st.logbeta))
                cy_delete(c, st.cverts, st.cedges, st.cptr, st.m, st.n, st.partner, st.eu, st.m_cap, st.a_buf, st.b_buf)
                out.append((0.5 * a, st.to_config()))
                out.append((0.5 * (1 - a), w))
            else:
                out.append((0.5, w))
            return out
        run(cy_outcomes)
    return mats


@dataclass
class StationarityReport:
    deviation: float
    n_states: int
    irreducible: bool
    per_move_deviation: list
    row_sum_error: float
    cycle_space_covered: bool


def validate_stationarity(g: Graph, U: WeightFunction, N, beta, m_cap: int, cycles: CycleList | None = None,
                          max_states: int = 10_000) -> StationarityReport:
    """Exact one-sweep kernel P on the truncated space; max |mu P - mu| for the target mu."""
    states = enumerate_configs(g, m_cap, limit=max_states)
    state = ChainState(g, U, N, beta, m_cap, cycles)
    mu = np.array([rpm_weight(g, w, U, N, beta) for w in states])
    mu = mu / mu.sum()
    mats = _move_kernels(state, states)
    P = np.eye(len(states))
    per_move = []
    for M in mats:
        per_move.append(float(np.abs(mu @ M - mu).max()))
        P = P @ M
    dev = float(np.abs(mu @ P - mu).max())
    rows = float(np.abs(P.sum(axis=1) - 1).max())
    # reachability over the union of single-move supports, and over the sweep
    support = np.zeros_like(P, dtype=bool)
    for M in mats:
        support |= M > 0
    irreducible = _strongly_connected(support) and _strongly_connected(P > 0)
    return StationarityReport(dev, len(states), irreducible, per_move, rows, state.cycles.spans_cycle_space(g))


def _strongly_connected(A: np.ndarray) -> bool:
    from scipy.sparse.csgraph import connected_components

    ncomp, _ = connected_components(A.astype(np.int8), directed=True, connection="strong")
    return ncomp == 1


# -- sampler --------------------------------------------------------------------


@dataclass
class ChainOutput:
    """Per-sample records of one chain (after burn-in and thinning)."""

    graph: Graph
    params: dict
    hist: np.ndarray  # (samples, kmax+1) cycles by length, last bin = overflow
    edge_hist: np.ndarray  # (samples, kemax+1) edges by double-link count
    n_obs: np.ndarray  # (samples, len(obs)) local times at observed vertices
    obs_vertices: tuple
    conn: np.ndarray  # (samples, groups) fraction of pairs joined
    mid: np.ndarray  # (samples, groups) sandwich middle functional
    groups: tuple
    total_links: np.ndarray
    n_cycles: np.ndarray
    move_stats: dict
    cap_hit_rate: float
    thin: int
    tau_int: float
    seed: int | None
    elapsed: float
    cycle_space_covered: bool
    extra: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.hist.shape[0]


def integrated_autocorr(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with the self-consistent window."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4 or x.std() == 0:
        return 1.0
    f = np.fft.rfft(x - x.mean(), n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 1.0
    for w in range(1, n):
        tau += 2 * acf[w]
        if w >= c * tau:
            break
    return max(tau, 1.0)


class RPMSampler(BaseEstimator):
    """Sampler of the random path model; ``fit(graph)`` runs the chain.

    Parameters mirror the run configuration; ``thin="auto"`` sets the thinning
    to ceil of the integrated autocorrelation time of the total link count
    measured over the burn-in.
    """

    def __init__(self, weight=None, N=2.0, beta=0.5, m_cap=64, n_sweeps=10_000, burn_in=1000, thin="auto",
                 seed=None, cycle_max_len=4, kmax=16, kemax=16, obs_vertices=(0,), pairs=None,
                 checkpoint_every=0, checkpoint_path=None):
        self.weight = weight
        self.N = N
        self.beta = beta
        self.m_cap = m_cap
        self.n_sweeps = n_sweeps
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed
        self.cycle_max_len = cycle_max_len
        self.kmax = kmax
        self.kemax = kemax
        self.obs_vertices = obs_vertices
        self.pairs = pairs
        self.checkpoint_every = checkpoint_every
        self.checkpoint_path = checkpoint_path

    def _validate(self, g):
        from .weights import make_weight, weight_from_spec

        U = make_weight("constant") if self.weight is None else weight_from_spec(self.weight)
        if not isinstance(g, Graph):
            raise TypeError("fit expects a Graph")
        if not self.N > 0:
            raise ValueError(f"N must be > 0, got {self.N}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        for name in ("n_sweeps", "burn_in"):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.thin != "auto" and int(self.thin) < 1:
            raise ValueError("thin must be 'auto' or an integer >= 1")
        for x in self.obs_vertices:
            if not 0 <= x < g.n_vertices:
                raise ValueError(f"observed vertex {x} outside the graph")
        return U

    def fit(self, g: Graph, y=None):
        U = self._validate(g)
        rng = np.random.default_rng(self.seed)
        cycles = default_cycles(g, self.cycle_max_len)
        state = ChainState(g, U, self.N, self.beta, self.m_cap, cycles)
        self.state_ = state
        self.rng_ = rng
        t0 = time.perf_counter()
        trace = np.zeros(self.burn_in, dtype=np.int64)
        for i in range(self.burn_in):
            state.sweep(rng)
            trace[i] = state.m.sum()
        if self.thin == "auto":
            tau = integrated_autocorr(trace[len(trace) // 2:]) if self.burn_in >= 8 else 1.0
            thin = max(1, math.ceil(tau))
        else:
            tau, thin = float("nan"), int(self.thin)
        self.chain_ = self._run(g, state, rng, thin, tau, t0)
        return self

    def _run(self, g, state, rng, thin, tau, t0):
        pairs = default_pairs(g) if self.pairs is None else self.pairs
        groups = tuple(pairs)
        px, py, pg, cnt = [], [], [], []
        for gi, key in enumerate(groups):
            for x, y in pairs[key]:
                px.append(x)
                py.append(y)
                pg.append(gi)
            cnt.append(max(1, len(pairs[key])))
        px = np.array(px, dtype=np.int64)
        py = np.array(py, dtype=np.int64)
        pg = np.array(pg, dtype=np.int64)
        cnt = np.array(cnt, dtype=np.float64)
        n_samples = self.n_sweeps // thin
        E, V = g.n_edges, g.n_vertices
        hist = np.zeros((n_samples, self.kmax + 1), dtype=np.int32)
        edge_hist = np.zeros((n_samples, self.kemax + 1), dtype=np.int32)
        obs = np.array(self.obs_vertices, dtype=np.int64)
        n_obs = np.zeros((n_samples, len(obs)), dtype=np.int32)
        conn = np.zeros((n_samples, len(groups)))
        mid = np.zeros((n_samples, len(groups)))
        total_links = np.zeros(n_samples, dtype=np.int64)
        n_cycles = np.zeros(n_samples, dtype=np.int64)
        slots = g.max_degree * self.m_cap // 2 + 1
        link_cycle = np.full(E * self.m_cap, -1, dtype=np.int64)
        slot_cyc = np.zeros((V, slots), dtype=np.int64)
        slot_cnt = np.zeros((V, slots), dtype=np.int64)
        nslot = np.zeros(V, dtype=np.int64)
        dl_edge = np.zeros(E, dtype=np.int64)
        cap0 = int(state.cap_hits[0])
        prop0 = int(state.stats[DL_INS, 0] + state.stats[CY_INS, 0])
        half = state.N / 2
        for s in range(n_samples):
            for _ in range(thin):
                state.sweep(rng)
            n_cycles[s] = _measure(state.m, state.n, state.partner, state.eu, state.ev, state.m_cap, link_cycle,
                                   slot_cyc, slot_cnt, nslot, hist[s], edge_hist[s], dl_edge, px, py, pg, half,
                                   conn[s], mid[s], cnt)
            n_obs[s] = state.n[obs]
            total_links[s] = state.m.sum()
            if self.checkpoint_every and self.checkpoint_path and (s + 1) % self.checkpoint_every == 0:
                save_checkpoint(self.checkpoint_path, state, rng)
        props = int(state.stats[DL_INS, 0] + state.stats[CY_INS, 0]) - prop0
        cap_rate = (int(state.cap_hits[0]) - cap0) / props if props else 0.0
        params = {"graph": g.name, "weight": str(state.U), "N": state.N, "beta": state.beta, "m_cap": state.m_cap,
                  "n_sweeps": self.n_sweeps, "burn_in": self.burn_in}
        return ChainOutput(g, params, hist, edge_hist, n_obs, tuple(int(x) for x in obs), conn, mid, groups,
                           total_links, n_cycles, state.move_stats(), cap_rate, thin, tau, self.seed,
                           time.perf_counter() - t0, state.cycles.spans_cycle_space(g))


def save_checkpoint(path, state: ChainState, rng: np.random.Generator) -> None:
    data = {
        "config": json.loads(state.to_config().to_json()),
        "rng": rng.bit_generator.state,
        "sweeps": state.sweeps,
        "stats": state.stats.tolist(),
        "cap_hits": int(state.cap_hits[0]),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, default=int)


def load_checkpoint(path, state: ChainState) -> np.random.Generator:
    with open(path) as fh:
        data = json.load(fh)
    state.set_config(RpmConfig.from_json(state.g, json.dumps(data["config"])))
    state.sweeps = data["sweeps"]
    state.stats[:] = np.array(data["stats"])
    state.cap_hits[0] = data["cap_hits"]
    rng = np.random.default_rng()
    rng.bit_generator.state = data["rng"]
    return rng
