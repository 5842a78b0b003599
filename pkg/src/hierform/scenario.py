"""Scenario files: schema, loading, validation and verification.

Scenarios are YAML documents (schema version 1). Units are meters,
seconds and meters per second; fields carry the unit in their name where
it is not obvious (``dt_s``, ``speed_mps``). Unknown keys are rejected.
See ``docs/scenario_schema.md`` for the full schema.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as _PydanticError

from ._validation import TOL_DET
from .exceptions import FormationError, ParseError, ScenarioValidationError
from .geometry import AffineTransform, affinely_spans, enumerate_viable_assignments
from .graph import build_graph, complete_graph, is_d_plus_1_rooted
from .reorganizer import COSTS, affine_weight_stress, power_centric_topology
from .simulation import (ControllerParams, FailEvent, ReferenceSchedule,
                         ReorganizeEvent, TransformEvent, initial_state)
from .stress import compute_equilibrium_stress, is_affinely_localizable

SCHEMA_VERSION = 1

_STRICT = ConfigDict(extra="forbid", strict=True, frozen=True)


class _Model(BaseModel):
    model_config = _STRICT


class TransformSpec(_Model):
    time_s: float
    kind: Literal["transform"]
    A: list[list[float]]
    b: list[float] | None = None


class ReorganizeSpec(_Model):
    time_s: float
    kind: Literal["reorganize"]
    leaders: list[int] | None = None
    cost: str | None = None


class FailSpec(_Model):
    time_s: float
    kind: Literal["fail"]
    agent: int


EventSpec = Annotated[Union[TransformSpec, ReorganizeSpec, FailSpec],
                      Field(discriminator="kind")]


class WaypointSpec(_Model):
    position: list[float]
    speed_mps: float


class GraphSpec(_Model):
    leaders: list[int]
    topology: Literal["power_centric", "complete"] | None = None
    edges: list[Annotated[list[int], Field(min_length=2, max_length=2)]] | None = None
    stress: Literal["auto", "equilibrium", "affine"] = "auto"


class ControllerSpec(_Model):
    k_p: float = 1.0
    k_l: float = 5.0
    speed_cap_mps: float = 2.0
    feedforward: Literal["previous", "leaders_current"] = "previous"


class Scenario(_Model):
    """A validated scenario. Build with :func:`load_scenario` or :func:`parse_scenario`."""

    schema_version: Literal[1] = Field(alias="schema")
    name: str
    description: str = ""
    d: int
    dt_s: float = 0.01
    seed: int = 0
    duration_s: float | None = None
    settle_s: float = 5.0
    heading: Literal["fixed", "follow"] = "fixed"
    nominal: list[list[float]]
    graph: GraphSpec
    waypoints: list[WaypointSpec] = []
    events: list[EventSpec] = []
    controller: ControllerSpec = ControllerSpec()
    failure_cost: str = "heading_align"
    initial_jitter_m: float = 0.0

    # -- derived objects -----------------------------------------------------

    @property
    def n(self):
        return len(self.nominal)

    def nominal_array(self):
        return np.array(self.nominal, dtype=float)

    def build_graph(self):
        g = self.graph
        n, d = self.n, self.d
        if g.topology == "power_centric":
            followers = [i for i in range(n) if i not in g.leaders]
            return power_centric_topology(g.leaders, followers, d)
        if g.topology == "complete":
            return complete_graph(n, d, g.leaders)
        return build_graph(n, d, g.edges or [], g.leaders)

    def build_stress(self, graph=None):
        graph = self.build_graph() if graph is None else graph
        mode = self.graph.stress
        if mode == "auto":
            mode = "affine" if self.graph.topology == "power_centric" else "equilibrium"
        if mode == "affine":
            return affine_weight_stress(graph, self.nominal_array())
        return compute_equilibrium_stress(graph, self.nominal_array())

    def schedule(self):
        transforms = [
            (e.time_s, _transform(e, self.d)) for e in self.events
            if isinstance(e, TransformSpec)
        ]
        return ReferenceSchedule(
            start=self.nominal_array().mean(axis=0),
            waypoints=tuple((tuple(w.position), w.speed_mps) for w in self.waypoints),
            transforms=tuple(transforms), heading=self.heading)

    def sim_events(self):
        out = []
        for e in self.events:
            if isinstance(e, TransformSpec):
                out.append(TransformEvent(e.time_s, _transform(e, self.d)))
            elif isinstance(e, ReorganizeSpec):
                out.append(ReorganizeEvent(
                    e.time_s, None if e.leaders is None else tuple(e.leaders), e.cost))
            else:
                out.append(FailEvent(e.time_s, e.agent))
        return out

    def params(self):
        c = self.controller
        return ControllerParams(k_p=c.k_p, k_l=c.k_l, speed_cap=c.speed_cap_mps,
                                feedforward=c.feedforward)

    @property
    def duration(self) -> float:
        if self.duration_s is not None:
            return self.duration_s
        return self.schedule().arrival_time + self.settle_s

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt_s))

    def initial_state(self, *, record_timing=False):
        nominal = self.nominal_array()
        graph = self.build_graph()
        positions = nominal.copy()
        if self.initial_jitter_m > 0:
            rng = np.random.default_rng(self.seed)
            positions += rng.normal(0.0, self.initial_jitter_m, size=nominal.shape)
        return initial_state(nominal, graph, self.build_stress(graph), self.schedule(),
                             params=self.params(), events=self.sim_events(),
                             positions=positions, failure_cost=self.failure_cost,
                             record_timing=record_timing)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True,
                          separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, **changes) -> "Scenario":
        data = self.model_dump(mode="json", by_alias=True)
        data.update({k: v for k, v in changes.items() if v is not None})
        return parse_scenario(data)

    def without_reorganization(self) -> "Scenario":
        """Same route and schedule with every scripted reorganization removed."""
        data = self.model_dump(mode="json", by_alias=True)
        data["events"] = [e for e in data["events"] if e["kind"] != "reorganize"]
        data["name"] = self.name + "_fixed_leaders"
        return parse_scenario(data)


def _transform(e: TransformSpec, d):
    b = np.zeros(d) if e.b is None else np.array(e.b, float)
    return AffineTransform(np.array(e.A, float), b)


# ---------------------------------------------------------------------------
# validation

def _semantic_errors(s: Scenario, geometric=True):
    errs = []
    add = lambda path, msg: errs.append((path, msg))
    d, n = s.d, s.n

    if d not in (2, 3):
        add("d", f"must be 2 or 3, got {d}")
        return errs
    if s.dt_s <= 0:
        add("dt_s", "must be positive")
    if s.duration_s is not None and s.duration_s < 0:
        add("duration_s", "must be non-negative")
    if s.settle_s < 0:
        add("settle_s", "must be non-negative")
    if s.initial_jitter_m < 0:
        add("initial_jitter_m", "must be non-negative")
    for k in ("k_p", "k_l", "speed_cap_mps"):
        if getattr(s.controller, k) <= 0:
            add(f"controller.{k}", "must be positive")
    if s.failure_cost not in COSTS:
        add("failure_cost", f"unknown cost {s.failure_cost!r}; known: {sorted(COSTS)}")

    shape_ok = True
    for i, p in enumerate(s.nominal):
        if len(p) != d:
            add(f"nominal.{i}", f"point has {len(p)} coordinates, expected {d}")
            shape_ok = False
    if n < d + 1:
        add("nominal", f"need at least d + 1 = {d + 1} agents, got {n}")
        shape_ok = False
    if shape_ok and geometric and not affinely_spans(s.nominal_array()):
        add("nominal", "nominal configuration does not affinely span R^d")

    def check_ids(path, ids):
        ok = True
        for k, v in enumerate(ids):
            if not 0 <= v < n:
                add(f"{path}.{k}", f"agent id {v} out of range for n={n}")
                ok = False
        return ok

    g = s.graph
    leaders_ok = check_ids("graph.leaders", g.leaders)
    if len(set(g.leaders)) != len(g.leaders):
        add("graph.leaders", "duplicate leader ids")
        leaders_ok = False
    if len(g.leaders) < d + 1:
        add("graph.leaders", f"need at least d + 1 = {d + 1} leaders, got {len(g.leaders)}")
        leaders_ok = False
    if (g.topology is None) == (g.edges is None):
        add("graph", "give exactly one of 'topology' or 'edges'")
    if g.edges is not None:
        seen = set()
        for k, (t, h) in enumerate(g.edges):
            check_ids(f"graph.edges.{k}", [t, h])
            if t == h:
                add(f"graph.edges.{k}", "self-loop")
            if (t, h) in seen:
                add(f"graph.edges.{k}", "duplicate edge")
            seen.add((t, h))
    if (shape_ok and leaders_ok and geometric
            and not affinely_spans(s.nominal_array()[g.leaders])):
        add("graph.leaders", "initial leader positions do not affinely span R^d "
                             "(initial assignment not viable)")

    for k, w in enumerate(s.waypoints):
        if len(w.position) != d:
            add(f"waypoints.{k}.position", f"has {len(w.position)} coordinates, expected {d}")
        if w.speed_mps <= 0:
            add(f"waypoints.{k}.speed_mps", "must be positive")

    prev = None
    for k, e in enumerate(s.events):
        path = f"events.{k}"
        if e.time_s < 0:
            add(f"{path}.time_s", "must be non-negative")
        if prev is not None and e.time_s <= prev:
            add(f"{path}.time_s", f"event times must be strictly increasing "
                                  f"({e.time_s} after {prev})")
        prev = e.time_s
        if isinstance(e, TransformSpec):
            if len(e.A) != d or any(len(row) != d for row in e.A):
                add(f"{path}.A", f"must be a {d}x{d} matrix (row-major list of rows)")
            elif abs(np.linalg.det(np.array(e.A, float))) <= TOL_DET:
                add(f"{path}.A", "non-invertible transform (det A = 0)")
            if e.b is not None and len(e.b) != d:
                add(f"{path}.b", f"must have length {d}")
        elif isinstance(e, ReorganizeSpec):
            if (e.leaders is None) == (e.cost is None):
                add(path, "give exactly one of 'leaders' or 'cost'")
            if e.cost is not None and e.cost not in COSTS:
                add(f"{path}.cost", f"unknown cost {e.cost!r}; known: {sorted(COSTS)}")
            if e.leaders is not None:
                check_ids(f"{path}.leaders", e.leaders)
                if len(set(e.leaders)) != len(e.leaders):
                    add(f"{path}.leaders", "duplicate leader ids")
                if len(e.leaders) != len(g.leaders):
                    add(f"{path}.leaders",
                        f"must name {len(g.leaders)} leaders, got {len(e.leaders)}")
        else:
            check_ids(f"{path}.agent", [e.agent])
    return errs


def parse_scenario(data, *, geometric=True) -> Scenario:
    """Validate a decoded scenario document.

    Raises :class:`ScenarioValidationError` listing every problem. With
    ``geometric=False`` the span/viability checks are skipped so degenerate
    nominals can still be inspected.
    """
    if not isinstance(data, dict):
        raise ScenarioValidationError([("", "scenario document must be a mapping")])
    if "schema" in data and data["schema"] != SCHEMA_VERSION:
        raise ScenarioValidationError(
            [("schema", f"unsupported schema version {data['schema']!r}; "
                        f"expected {SCHEMA_VERSION}")])
    try:
        s = Scenario.model_validate(data)
    except _PydanticError as exc:
        raise ScenarioValidationError(
            [(".".join(str(p) for p in err["loc"]), err["msg"]) for err in exc.errors()]
        ) from None
    errs = _semantic_errors(s, geometric=geometric)
    if errs:
        raise ScenarioValidationError(errs)
    return s


def load_scenario(path, *, geometric=True) -> Scenario:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parse_scenario(data, geometric=geometric)


# ---------------------------------------------------------------------------
# bundled corpus

def corpus_names():
    root = resources.files("hierform") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def corpus_path(name) -> Path:
    p = resources.files("hierform") / "scenarios" / f"{name}.yaml"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled scenario named {name!r}")
    return Path(str(p))


def load_corpus(name) -> Scenario:
    return load_scenario(corpus_path(name))


# ---------------------------------------------------------------------------
# verification

def verify_scenario(s: Scenario) -> dict:
    """Structural and geometric checks on a loaded scenario.

    Reports affine span of the nominal, (d+1)-rootedness of the initial
    graph, localizability of its stress, and the viability of every
    ``C(n, n_l)`` leader subset. ``ok`` is the conjunction of the checks
    that must hold for the scenario to run.
    """
    nominal = s.nominal_array()
    n_l = len(s.graph.leaders)
    report = {"name": s.name, "n": s.n, "d": s.d, "n_l": n_l}
    report["spans"] = bool(affinely_spans(nominal))

    graph = s.build_graph()
    rooted, roots = is_d_plus_1_rooted(graph)
    report["rooted"] = bool(rooted)
    report["root_witness"] = None if roots is None else list(roots)

    try:
        stress = s.build_stress(graph)
        loc = is_affinely_localizable(stress)
        report["localizable"] = bool(loc.localizable)
        report["min_singular_value_ff"] = loc.min_singular_value_ff
        report["stress_error"] = None
    except FormationError as exc:
        report["localizable"] = False
        report["min_singular_value_ff"] = None
        report["stress_error"] = f"{type(exc).__name__}: {exc}"

    viable = enumerate_viable_assignments(nominal, n_l, leader_slots=s.graph.leaders)
    viable_sets = {a.leader_set for a in viable}
    subsets = []
    for c in combinations(range(s.n), n_l):
        subsets.append({"leaders": list(c),
                        "spans": bool(affinely_spans(nominal[list(c)])),
                        "viable": frozenset(c) in viable_sets})
    report["subsets"] = subsets
    report["initial_viable"] = frozenset(s.graph.leaders) in viable_sets
    report["ok"] = bool(report["spans"] and rooted and report["localizable"]
                        and report["initial_viable"])
    return report
