from __future__ import annotations

import copy
from pathlib import Path

import pytest
import yaml

from hierform.exceptions import ParseError, ScenarioValidationError
from hierform.scenario import (corpus_names, corpus_path, load_corpus, load_scenario,
                               parse_scenario, verify_scenario)

DATA = Path(__file__).parent / "data"


def _doc(name="pentagon_uturn"):
    return yaml.safe_load(corpus_path(name).read_text())


def _errors(doc, **kw):
    with pytest.raises(ScenarioValidationError) as info:
        parse_scenario(doc, **kw)
    return info.value.errors


def test_corpus_contents():
    assert set(corpus_names()) >= {"simplex_static", "square_stress", "pentagon_line8",
                                   "pentagon_uturn", "pentagon_Lturn_balance",
                                   "leader_failure"}


@pytest.mark.parametrize("name", corpus_names())
def test_every_corpus_scenario_verifies(name):
    report = verify_scenario(load_corpus(name))
    assert report["ok"], report


def test_uturn_shape():
    s = load_corpus("pentagon_uturn")
    assert s.n == 5 and len(s.events) == 9
    assert [e.kind for e in s.events].count("reorganize") == 3


def test_pyramid_has_five_reorganizations_and_waypoints():
    s = load_corpus("pyramid_five_waypoints")
    assert (s.n, s.d, len(s.waypoints)) == (5, 3, 5)
    assert [e.kind for e in s.events].count("reorganize") == 5


def test_non_increasing_times():
    doc = _doc()
    doc["events"][1]["time_s"] = doc["events"][0]["time_s"] = 3.0
    errs = _errors(doc)
    assert any(p == "events.1.time_s" and "increasing" in m for p, m in errs)


def test_singular_transform_file_rejected():
    with pytest.raises(ScenarioValidationError) as info:
        load_scenario(DATA / "pentagon_uturn_singular.yaml")
    assert any("non-invertible" in m for _, m in info.value.errors)


def test_all_errors_reported_together():
    doc = _doc()
    doc["events"][2]["A"] = [[2.0, 0.0], [0.5, 0.0]]
    doc["events"].append({"time_s": 30.0, "kind": "fail", "agent": 9})
    doc["waypoints"][0]["speed_mps"] = -1.0
    errs = _errors(doc)
    paths = {p for p, _ in errs}
    assert {"events.2.A", "events.9.agent.0", "waypoints.0.speed_mps"} <= paths


def test_agent_id_out_of_range():
    doc = _doc("leader_failure")
    doc["events"][0]["agent"] = 9
    errs = _errors(doc)
    assert any("out of range" in m for _, m in errs)


def test_unknown_field_rejected():
    doc = _doc()
    doc["dt"] = 0.01
    errs = _errors(doc)
    assert any(p == "dt" for p, _ in errs)


def test_nested_unknown_field_rejected():
    doc = _doc()
    doc["waypoints"][0]["speed"] = 1.0
    errs = _errors(doc)
    assert any(p.startswith("waypoints.0") for p, _ in errs)


def test_strict_types():
    doc = _doc()
    doc["dt_s"] = "0.01"
    assert any(p == "dt_s" for p, _ in _errors(doc))


def test_schema_version():
    doc = _doc()
    doc["schema"] = 2
    assert _errors(doc)[0][0] == "schema"


def test_degenerate_nominal_and_leaders():
    doc = _doc()
    doc["nominal"] = [[float(i), 0.0] for i in range(5)]
    msgs = [m for _, m in _errors(doc)]
    assert any("does not affinely span" in m for m in msgs)
    # geometric checks can be turned off to inspect degenerate files
    assert parse_scenario(doc, geometric=False).n == 5


def test_unknown_cost():
    doc = _doc()
    doc["events"][1]["cost"] = "shortest"
    assert any(p == "events.1.cost" for p, _ in _errors(doc))


def test_reorganize_needs_one_of_leaders_or_cost():
    doc = _doc()
    doc["events"][1]["leaders"] = [0, 1, 2]
    assert any(p == "events.1" for p, _ in _errors(doc))


def test_graph_needs_one_of_topology_or_edges():
    doc = _doc()
    doc["graph"]["edges"] = [[0, 3]]
    assert any(p == "graph" for p, _ in _errors(doc))


def test_edge_list_graph():
    doc = _doc("square_stress")
    del doc["graph"]["topology"]
    doc["graph"]["edges"] = [[a, b] for a in range(4) for b in range(4) if a != b]
    s = parse_scenario(doc)
    assert len(s.build_graph().edges) == 12


def test_parse_error(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("schema: 1\nname: [unclosed\n")
    with pytest.raises(ParseError):
        load_scenario(p)


def test_not_a_mapping():
    with pytest.raises(ScenarioValidationError):
        parse_scenario([1, 2, 3])


def test_digest_is_stable_and_sensitive():
    a, b = load_corpus("pentagon_uturn"), load_corpus("pentagon_uturn")
    assert a.digest() == b.digest()
    doc = _doc()
    doc["seed"] = 1
    assert parse_scenario(doc).digest() != a.digest()


def test_duration_defaults_to_arrival_plus_settle():
    s = load_corpus("leader_failure")
    assert s.duration == pytest.approx(20.0 + 5.0)
    assert s.n_ticks == 2500


def test_overrides():
    s = load_corpus("leader_failure").with_overrides(dt_s=0.02, seed=None)
    assert s.dt_s == 0.02 and s.seed == 0


def test_without_reorganization():
    s = load_corpus("pentagon_uturn").without_reorganization()
    assert all(e.kind != "reorganize" for e in s.events)
    assert len(s.events) == 6


def test_verify_reports_every_leader_subset():
    r = verify_scenario(load_corpus("pentagon_uturn"))
    assert len(r["subsets"]) == 10
    assert sum(x["viable"] for x in r["subsets"]) == 5
    assert r["rooted"] and r["root_witness"] == [0, 1, 2]


def test_jitter_uses_seed():
    doc = _doc("square_stress")
    a = parse_scenario(doc).initial_state().positions
    doc2 = copy.deepcopy(doc)
    doc2["seed"] = 7
    b = parse_scenario(doc2).initial_state().positions
    assert (a != b).any()
    assert (parse_scenario(doc).initial_state().positions == a).all()
