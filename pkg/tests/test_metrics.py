from __future__ import annotations

import numpy as np
import pytest

from hierform.exceptions import NotLocalizable
from hierform.graph import build_graph
from hierform.metrics import (MIN_DRAWS, error_propagation_probe, follower_chain_topology,
                              follower_rms, leader_only_topology, metrics,
                              paired_one_sided_test)
from hierform.runner import run_scenario
from hierform.scenario import load_corpus
from hierform.trace import Trace
from oracles import barycentric, chain_error_coefficients

# Noise amplification factors for the pentagon with leaders (0, 1, 2),
# from the sequential oracle below: sum of squared coefficients per follower.
LEADER_ONLY_FACTOR = 4 + np.sqrt(5)          # 6.2360680 for each follower
CHAIN_FACTOR_F4 = 8.8541020
CHAIN_MEAN_FACTOR = 7.5450850


def _line_trace(n_ticks=1000, dt=0.01, speed=1.0):
    recs = []
    for k in range(n_ticks + 1):
        x = speed * dt * k
        recs.append({"tick": k, "time_s": k * dt, "events": [], "agents": [
            {"id": 0, "role": "leader", "alive": True, "pos": [x, 0.0],
             "vel": [speed if k else 0.0, 0.0], "err": [0.0, 0.0]}]})
    return Trace({"n": 1, "d": 2, "n_ticks": n_ticks, "arrival_time_s": None}, recs)


@pytest.fixture(scope="module")
def state():
    return load_corpus("pentagon_uturn").initial_state()


def test_single_agent_line():
    m = metrics(_line_trace())
    assert m["path_length_m"][0] == pytest.approx(10.0, abs=0.01)
    assert m["mean_speed_mps"][0] == pytest.approx(1.0, abs=0.01)
    assert m["path_length_spread_m"] == 0.0
    assert m["n_reorganizations"] == 0


def test_static_scenario_has_zero_paths():
    m = run_scenario(load_corpus("simplex_static")).summary
    assert np.allclose(m["path_length_m"], 0.0, atol=1e-12)
    assert m["final_follower_rms_error_m"] == 0.0


def test_rms_is_per_tick(state):
    t = run_scenario(load_corpus("leader_failure").with_overrides(duration_s=1.0))
    rms = follower_rms(t)
    assert len(rms) == len(t.records)
    errs = t.errors()[-1, [3, 4]]
    assert rms[-1] == pytest.approx(np.sqrt(np.mean(np.sum(errs ** 2, axis=1))))


def test_failure_metrics():
    m = run_scenario(load_corpus("leader_failure")).summary
    assert m["failure_to_reorganization_ticks"] == [0]
    assert m["localizable_after_reorganization"]


def _oracle_factors(state, g):
    nominal = np.asarray(state.nominal)
    nw = {}
    for f in g.followers:
        nbrs = sorted(g.in_neighbors(f))
        nw[f] = dict(zip(nbrs, barycentric(nominal[f], nominal[nbrs])))
    tau = chain_error_coefficients(list(g.followers), nw, g.n)
    return {f: float(c @ c) for f, c in tau.items()}


def test_oracle_factors(state):
    lo = leader_only_topology(state.graph.leaders, state.graph.followers, 2)
    ch = follower_chain_topology(state.graph.leaders, state.graph.followers, 2)
    a, b = _oracle_factors(state, lo), _oracle_factors(state, ch)
    assert a[3] == pytest.approx(LEADER_ONLY_FACTOR, abs=1e-6)
    assert a[4] == pytest.approx(LEADER_ONLY_FACTOR, abs=1e-6)
    assert b[4] == pytest.approx(CHAIN_FACTOR_F4, abs=1e-6)
    assert np.mean(list(b.values())) == pytest.approx(CHAIN_MEAN_FACTOR, abs=1e-6)


def test_probe_matches_analytic(state):
    lo = leader_only_topology(state.graph.leaders, state.graph.followers, 2)
    ch = follower_chain_topology(state.graph.leaders, state.graph.followers, 2)
    sigma = 0.01
    res = error_propagation_probe(state, sigma, {"lo": lo, "ch": ch}, n_draws=20000, seed=3)
    for key, factor in (("lo", LEADER_ONLY_FACTOR), ("ch", CHAIN_MEAN_FACTOR)):
        expected = sigma * np.sqrt(2 * factor)
        assert res[key].rms == pytest.approx(expected, abs=4 * res[key].stderr)


def test_probe_zero_sigma(state):
    lo = leader_only_topology(state.graph.leaders, state.graph.followers, 2)
    res = error_propagation_probe(state, 0.0, [lo])
    assert res["topology_0"].rms == 0.0


def test_probe_scales_linearly(state):
    lo = leader_only_topology(state.graph.leaders, state.graph.followers, 2)
    a = error_propagation_probe(state, 0.01, [lo], seed=5)["topology_0"].rms
    b = error_propagation_probe(state, 0.02, [lo], seed=5)["topology_0"].rms
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_leader_only_not_worse(state):
    lo = leader_only_topology(state.graph.leaders, state.graph.followers, 2)
    ch = follower_chain_topology(state.graph.leaders, state.graph.followers, 2)
    res = error_propagation_probe(state, 0.01, {"lo": lo, "ch": ch})
    holds, p = paired_one_sided_test(res["lo"], res["ch"])
    assert holds and p < 1e-10


def test_paired_test_identical_holds(state):
    lo = leader_only_topology(state.graph.leaders, state.graph.followers, 2)
    res = error_propagation_probe(state, 0.01, {"a": lo, "b": lo})
    assert paired_one_sided_test(res["a"], res["b"]) == (True, 0.0)


def test_too_few_draws(state):
    lo = leader_only_topology(state.graph.leaders, state.graph.followers, 2)
    with pytest.raises(ValueError, match=str(MIN_DRAWS)):
        error_propagation_probe(state, 0.01, [lo], n_draws=MIN_DRAWS - 1)


def test_negative_sigma(state):
    lo = leader_only_topology(state.graph.leaders, state.graph.followers, 2)
    with pytest.raises(ValueError):
        error_propagation_probe(state, -0.1, [lo])


def test_non_localizable_topology(state):
    # follower 4 hears a single neighbor, which cannot span the plane
    edges = [(a, b) for a in (0, 1, 2) for b in (0, 1, 2) if a != b]
    edges += [(0, 3), (1, 3), (2, 3), (3, 4), (4, 3)]
    g = build_graph(5, 2, edges, [0, 1, 2])
    with pytest.raises((NotLocalizable, ValueError)):
        error_propagation_probe(state, 0.01, [g])
