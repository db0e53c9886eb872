import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_attempts, mean_absorption, transient
from treecp.errors import DataError, DomainError, PreconditionError
from treecp.forward import Trajectory, simulate_forward
from treecp.graph import build_dary_tree, from_edges, level, path_graph
from treecp.observables import (
    ExtinctionSample, attempt_counter, attract_inequality_check, check_rep_bound,
    count_attempts, coupling_discrepancy, estimate_bstar, exponentiality_test,
    extinction_mean, extinction_samples, extinction_time, f_holds, point_to_point_probability,
    predicate_F, regime, root_reinfection_curve, spread_event_probability,
)
from treecp.params import ParameterSet

P2 = ParameterSet.for_degree(2)


def hand_trajectory(topology, initial, events, horizon):
    ev = sorted(events)
    return Trajectory(
        topology, topology.as_vertex_set(initial),
        np.array([e[0] for e in ev], float), np.array([e[1] for e in ev], np.int64),
        np.array([e[2] for e in ev], np.int8), float(horizon),
    )


# -- extinction -------------------------------------------------------------------

def test_extinction_empty():
    t = build_dary_tree(2, 2)
    assert extinction_time(t, 1.0, [], 10.0, 0).tau == 0.0


def test_isolated_vertex_mean():
    g = from_edges(1, [])
    rep = extinction_mean(extinction_samples(g, 1.0, [0], 1e3, 100_000, 1))
    assert rep.ci_low <= 1.0 <= rep.ci_high


def test_two_path_exact():
    g = path_graph(2)
    exact = mean_absorption(g, 1.0, [0, 1])
    rep = extinction_mean(extinction_samples(g, 1.0, [0, 1], 1e4, 50_000, 2))
    assert rep.ci_low <= exact <= rep.ci_high


def test_censoring():
    t = build_dary_tree(2, 3)
    s = extinction_time(t, 4.0, t.full_set(), 1.0, 0)
    assert s.censored and s.tau == 1.0


# -- attempt counter -------------------------------------------------------------

def test_attempts_examples():
    assert count_attempts([], 1.0, 4.0) == 0
    assert count_attempts([(0.0, 3.0)], 1.0, 3.0) == 2
    assert count_attempts([(0.0, 0.4), (2.0, 2.2)], 1.0, 4.0) == 2
    with pytest.raises(DomainError):
        count_attempts([], 2.0, 1.0)


def test_attempts_on_trajectory():
    g = from_edges(1, [])
    traj = hand_trajectory(g, [0], [(1.5, 0, 0)], 6.0)
    assert attempt_counter(traj, [0], 0.5, 6.0) == 3
    never = hand_trajectory(g, [], [], 6.0)
    assert attempt_counter(never, [0], 0.5, 6.0) == 0


def occupancy(draw_floats):
    pts = sorted(set(round(x, 3) for x in draw_floats))
    return [(pts[i], pts[i + 1]) for i in range(0, len(pts) - 1, 2)]


@settings(max_examples=400, deadline=None)
@given(st.lists(st.integers(0, 80), max_size=12), st.integers(1, 24), st.integers(4, 80))
def test_greedy_matches_bruteforce(pts, t0, t):
    # eighths are exact binary fractions, so both sides compare exactly
    iv = occupancy([p / 8 for p in pts])
    if not t0 < t:
        return
    assert count_attempts(iv, t0 / 8, t / 8) == brute_attempts(iv, t0 / 8, t / 8)


def test_long_run_no_drift():
    assert count_attempts([(0.0, 1.0)], 0.05, 0.5) == 9
    assert count_attempts([(0.0, 100.0)], 0.1, 100.0) == 999


# -- predicate F ------------------------------------------------------------------

def test_f_examples():
    assert f_holds([(0.0, 5.0)], 1.0, 0.0, 5.0)
    assert not f_holds([], 1.0, 0.0, 5.0)
    assert f_holds([(0.0, 2.0), (2.9, 5.0)], 1.0, 0.0, 5.0)
    assert not f_holds([(0.0, 2.0), (3.1, 5.0)], 1.0, 0.0, 5.0)
    # a gap of exactly S fails
    assert not f_holds([(0.0, 2.0), (3.0, 5.0)], 1.0, 0.0, 5.0)
    # degenerate window: one touch suffices
    assert f_holds([(1.0, 1.2)], 10.0, 0.0, 3.0)
    assert not f_holds([(4.0, 5.0)], 10.0, 0.0, 3.0)


def test_predicate_f_trajectory():
    t = build_dary_tree(2, 2)
    lvl = np.flatnonzero(level(t, 1))
    traj = hand_trajectory(t, [lvl[0]], [(1.0, lvl[0], 0), (1.9, lvl[1], 1)], 4.0)
    assert predicate_F(traj, 1, 1.0, (0.0, 4.0))
    traj = hand_trajectory(t, [lvl[0]], [(1.0, lvl[0], 0), (2.1, lvl[1], 1)], 4.0)
    assert not predicate_F(traj, 1, 1.0, (0.0, 4.0))
    with pytest.raises(DomainError):
        predicate_F(traj, 1, 1.0, (0.0, 5.0))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 10), max_size=10), st.lists(st.floats(0, 10), max_size=4),
       st.floats(0.1, 4.0))
def test_f_monotone(pts, extra, S):
    iv = occupancy(pts)
    more = occupancy(extra)
    merged = sorted(iv + more)
    union = []
    for a, b in merged:
        if union and a <= union[-1][1]:
            union[-1] = (union[-1][0], max(b, union[-1][1]))
        else:
            union.append((a, b))
    if f_holds(iv, S, 0.0, 10.0):
        assert f_holds(union, S, 0.0, 10.0)


# -- repeated-attempt bound -----------------------------------------------------------

def test_rep_bound_trivial():
    t = build_dary_tree(2, 2)
    rep = check_rep_bound(t, 2.0, [0], [0], 0.01, lambda c: c.any(), 0.5, 2.0, 200)
    assert rep.estimate == 0.0 and rep.extra["consistent"]


def test_rep_bound_single_vertex():
    g = from_edges(1, [])
    t0, t_end = 0.5, 2.0
    n0 = math.ceil(t_end / t0) - 1
    eps0 = -math.expm1(-t0)
    rep = check_rep_bound(g, 1.0, [0], [0], t0, lambda c: not c.any(), eps0, t_end, 20_000,
                          seed=4, n_attempts=n0)
    assert rep.ci_low <= math.exp(-t_end) <= rep.ci_high
    assert rep.extra["bound"] == pytest.approx(math.exp(-n0 * t0))
    assert rep.extra["consistent"]


def test_rep_bound_small_tree():
    t = build_dary_tree(2, 2)
    leaves = level(t, 2)
    root_infected = lambda c: bool(c[0])
    t0 = 1.0
    # empirical eps0: worst leaf singleton, lower confidence limit
    eps = []
    for x in np.flatnonzero(leaves):
        hits = 0
        for s in range(2000):
            traj = simulate_forward(t, 4.0, [x], t0, 10_000 + s)
            hits += any(c[0] for _, c in traj.configurations())
        eps.append(hits / 2000)
    eps0 = max(0.0, min(eps) - 3 * math.sqrt(0.25 / 2000))
    rep = check_rep_bound(t, 4.0, [3], leaves, t0, root_infected,
                          eps0, 5.0, 10_000, seed=5, n_attempts=2)
    assert rep.extra["consistent"]


# -- level-one estimators -------------------------------------------------------------

def test_spread_level_zero():
    t = build_dary_tree(2, 3)
    rep = spread_event_probability(t, 2.0, [0], 0, P2, 50)
    assert rep.estimate == 1.0


def test_spread_precondition():
    t = build_dary_tree(2, 4)
    with pytest.raises(PreconditionError):
        spread_event_probability(t, 2.0, np.flatnonzero(level(t, 4)), 2, P2, 10)


def test_spread_monte_carlo():
    t = build_dary_tree(2, 6)
    rep = spread_event_probability(t, 4.0, [0], 2, P2, 2000, seed=1)
    assert rep.ci_low <= rep.estimate <= rep.ci_high
    assert rep.extra["bound"] == pytest.approx(P2.cbar * P2.theta**2 * P2.sigma)
    assert 0.5 < rep.estimate <= 1.0


def test_root_reinfection():
    res = root_reinfection_curve(build_dary_tree(2, 0), 1.0, 1.0, 2, 20_000, seed=3)
    assert res["curve"][0].estimate == 1.0
    r1 = res["curve"][1]
    assert r1.ci_low <= math.exp(-1.0) <= r1.ci_high
    t = build_dary_tree(2, 6)
    res = root_reinfection_curve(t, 4.0, 1.0, 6, 500, seed=2)
    assert len(res["curve"]) == 7
    assert all(r.ci_low <= r.estimate <= r.ci_high for r in res["curve"])
    assert 0 <= res["leaf_spread"].estimate <= 1


def test_point_to_point():
    t = build_dary_tree(2, 3)
    assert point_to_point_probability(t, 2.0, 4, 4, P2, 10).estimate == 1.0
    g = path_graph(2)
    params = ParameterSet.for_degree(2, ell=1.0)
    exact = sum(w for s, w in enumerate(transient(g, 1.0, [0], 1.0)) if s >> 1 & 1)
    rep = point_to_point_probability(g, 1.0, 0, 1, params, 40_000, seed=6)
    assert rep.ci_low <= exact <= rep.ci_high


def test_coupling_boundaries():
    t = build_dary_tree(2, 2)
    assert coupling_discrepancy(t, 2.0, [0.0], 50)["reports"][0].estimate == 1.0
    one = build_dary_tree(2, 0)
    res = coupling_discrepancy(one, 2.0, [0.0, 1.0, 3.0], 100)
    assert all(r.estimate == 0.0 for r in res["reports"])


def test_coupling_decreasing():
    t = build_dary_tree(2, 3)
    res = coupling_discrepancy(t, 4.0, [1.0, 5.0, 20.0], 300, seed=1)
    assert res["nonincreasing"]


# -- extinction-time laws ------------------------------------------------------------------

def test_bstar_rejects_zero_height():
    with pytest.raises(DomainError):
        estimate_bstar(2, 1.0, [0, 3], trials=10)


def test_bstar_pure_death_limit():
    # with lambda ~ 0, tau is the maximum of |T_n| independent Exp(1) clocks
    n, trials = 3, 4000
    size = 2 ** (n + 1) - 1
    rep = estimate_bstar(2, 1e-9, [n], 0.5, trials, seed=3, horizon=1e3)
    exact = -math.log(1 - 0.5 ** (1 / size)) / n
    row = rep.extra["table"][0]
    assert row["ci_low"] <= exact <= row["ci_high"]


def test_bstar_table():
    rep = estimate_bstar(2, 0.3, [3, 4, 5], 0.5, 500, seed=1)
    assert [r["n"] for r in rep.extra["table"]] == [3, 4, 5]
    assert rep.ci_low <= rep.estimate <= rep.ci_high
    assert rep.extra["regime"] == "subcritical"


def samples(x):
    return [ExtinctionSample(float(v), False, i) for i, v in enumerate(x)]


def test_expo_scale_free():
    rng = np.random.default_rng(0)
    x = rng.exponential(7.0, 20_000)
    a = exponentiality_test(samples(x))
    b = exponentiality_test(samples(3.5 * x))
    assert a.passed and a.statistic < 0.015
    assert a.statistic == pytest.approx(b.statistic, abs=1e-12)


def test_expo_point_mass():
    res = exponentiality_test(samples(np.full(500, 2.0)))
    assert res.statistic == pytest.approx(1 - math.exp(-1), abs=1e-9)
    assert not res.passed


def test_expo_errors():
    with pytest.raises(DataError):
        exponentiality_test(samples(np.ones(50)))
    s = samples(np.ones(200)) + [ExtinctionSample(1.0, True, 0)] * 5
    with pytest.raises(DataError):
        exponentiality_test(s)


def test_attract_single_vertex():
    g = build_dary_tree(2, 0)
    res = attract_inequality_check(g, 1.0, s_grid=[0.1, 0.5, 1.0, 3.0], trials=20_000, seed=2)
    assert res["violations"] == 0
    big = [r for r in res["rows"] if r["s"] >= res["mean"]]
    assert all(r["bound"] >= 1 for r in big)


def test_regime():
    assert regime(0.3, 2) == "subcritical"
    assert regime(4.0, 2) == "supercritical"
    assert regime(2.0, 2) == "unclassified"
    assert regime(1.0, 3) == "unclassified"
