"""Deterministic discrete-time leader/follower kinematics.

Leaders track an affine-scheduled reference with a first-order lag;
followers run the stress-weighted consensus law

    v_i = -k_p * sum_j w_ij (x_i - x_j) / sum_j w_ij + sum_j w_ij v_j / sum_j w_ij

with neighbor velocities taken from the previous tick (optionally, leader
neighbors use this tick's commands). Integration is explicit Euler. The
reference for agent ``i`` is

    c(t) + H(t) (S(t).A K (n_i - n_bar) + S(t).b)

where ``c`` runs along the waypoint polyline, ``H`` is the heading rotation
(identity unless the schedule follows the route heading), ``S`` the active
scheduled transform, ``K`` the body frame carried across reorganizations and
``n_bar`` the nominal centroid.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import NoViableAssignment, ScheduleExhausted, ZeroWeightSum
from .geometry import AffineTransform, RoleAssignment
from .graph import FormationGraph
from .reorganizer import CostContext, auto_reorganize, plan_for_assignment, reorganize
from .stress import StressAssignment

# event times within this many seconds of a tick count as due at that tick
TIME_EPS = 1e-9


@dataclass(frozen=True)
class ControllerParams:
    k_p: float = 1.0          # 1/s, follower position gain
    k_l: float = 5.0          # 1/s, leader lag gain
    speed_cap: float = 2.0    # m/s, applied to every agent
    # neighbor velocity fed forward to followers: "previous" uses every
    # neighbor's last-tick velocity; "leaders_current" uses the leaders'
    # velocity of this tick (still order independent, since leader commands
    # never read follower state)
    feedforward: str = "previous"

    def __post_init__(self):
        if self.feedforward not in ("previous", "leaders_current"):
            raise ValueError(f"unknown feedforward mode {self.feedforward!r}")


@dataclass(frozen=True)
class AgentState:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    role: str
    alive: bool


# ---------------------------------------------------------------------------
# events

@dataclass(frozen=True)
class TransformEvent:
    time_s: float
    transform: AffineTransform
    kind: str = "transform"


@dataclass(frozen=True)
class ReorganizeEvent:
    time_s: float
    leaders: tuple | None = None
    cost: str | None = None
    kind: str = "reorganize"


@dataclass(frozen=True)
class FailEvent:
    time_s: float
    agent: int
    kind: str = "fail"


# ---------------------------------------------------------------------------
# reference schedule

def _rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _heading_rotation(d, theta):
    if d == 2:
        return _rotation_2d(theta)
    R = np.eye(3)
    R[:2, :2] = _rotation_2d(theta)
    return R


@dataclass(frozen=True)
class ReferenceSchedule:
    """Waypoint route, scheduled transforms and heading policy.

    The route starts at ``start`` (the nominal centroid) and visits each
    waypoint in turn; a waypoint's speed applies to the segment ending at
    it. Scheduled transforms are step changes: the latest one with
    ``time_s <= t`` is active, identity before the first.
    """

    start: np.ndarray
    waypoints: tuple = ()               # ((position, speed_mps), ...)
    transforms: tuple = ()              # ((time_s, AffineTransform), ...)
    heading: str = "fixed"              # "fixed" | "follow"
    _points: np.ndarray = field(init=False, repr=False, compare=False)
    _times: tuple = field(init=False, repr=False, compare=False)
    _yaws: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        start = np.asarray(self.start, float)
        object.__setattr__(self, "start", start)
        pts = [start] + [np.asarray(p, float) for p, _ in self.waypoints]
        times = [0.0]
        for k, (_, speed) in enumerate(self.waypoints):
            length = float(np.linalg.norm(pts[k + 1] - pts[k]))
            times.append(times[-1] + length / float(speed))
        yaws = []
        prev = 0.0
        for k in range(len(self.waypoints)):
            seg = pts[k + 1] - pts[k]
            if np.linalg.norm(seg[:2]) > 0:
                prev = float(np.arctan2(seg[1], seg[0]))
            yaws.append(prev)
        # segments before the first xy motion inherit its yaw
        first = next((y for k, y in enumerate(yaws)
                      if np.linalg.norm((pts[k + 1] - pts[k])[:2]) > 0), 0.0)
        for k in range(len(yaws)):
            if np.linalg.norm((pts[k + 1] - pts[k])[:2]) > 0:
                break
            yaws[k] = first
        object.__setattr__(self, "_points", np.array(pts))
        object.__setattr__(self, "_times", tuple(times))
        object.__setattr__(self, "_yaws", tuple(yaws))
        object.__setattr__(self, "transforms",
                           tuple(sorted(self.transforms, key=lambda p: p[0])))

    @property
    def d(self):
        return self.start.shape[0]

    @property
    def arrival_time(self) -> float:
        return self._times[-1]

    def segment(self, t):
        """Index of the active segment, or ``None`` once the route is done."""
        if not self.waypoints or t >= self.arrival_time - TIME_EPS:
            return None
        k = bisect.bisect_right(self._times, t + TIME_EPS) - 1
        return min(max(k, 0), len(self.waypoints) - 1)

    def path(self, t):
        """Route point and its velocity at time ``t``."""
        k = self.segment(t)
        if k is None:
            return self._points[-1].copy(), np.zeros(self.d)
        p0, p1 = self._points[k], self._points[k + 1]
        seg = p1 - p0
        length = np.linalg.norm(seg)
        speed = float(self.waypoints[k][1])
        u = seg / length if length > 0 else np.zeros(self.d)
        tau = min(max(t - self._times[k], 0.0), self._times[k + 1] - self._times[k])
        return p0 + u * speed * tau, u * speed

    def goal_direction(self, t):
        k = self.segment(t)
        if k is None:
            return np.zeros(self.d)
        seg = self._points[k + 1] - self._points[k]
        n = np.linalg.norm(seg)
        return seg / n if n > 0 else np.zeros(self.d)

    def next_waypoint(self, t):
        k = self.segment(t)
        return None if k is None else self._points[k + 1].copy()

    def heading_matrix(self, t):
        if self.heading != "follow" or not self.waypoints:
            return np.eye(self.d)
        k = self.segment(t)
        k = len(self.waypoints) - 1 if k is None else k
        return _heading_rotation(self.d, self._yaws[k] - self._yaws[0])

    def transform_at(self, t) -> AffineTransform:
        active = AffineTransform.identity(self.d)
        for ts, tr in self.transforms:
            if ts <= t + TIME_EPS:
                active = tr
            else:
                break
        return active


def reference_configuration(nominal, schedule: ReferenceSchedule, t, frame=None):
    """Target positions for every agent and the common target velocity."""
    nominal = np.asarray(nominal, float)
    d = nominal.shape[1]
    K = np.eye(d) if frame is None else np.asarray(frame)
    c, v = schedule.path(t)
    H = schedule.heading_matrix(t)
    S = schedule.transform_at(t)
    rel = nominal - nominal.mean(axis=0)
    body = rel @ (S.A @ K).T + S.b
    return c + body @ H.T, v


def leader_reference(nominal, schedule: ReferenceSchedule, t, leaders=None, *,
                     frame=None, hold=True):
    """Leader targets at time ``t`` and their velocity.

    Past the final waypoint the reference holds still; with ``hold=False``
    that raises :class:`ScheduleExhausted` instead.
    """
    if not hold and schedule.waypoints and t > schedule.arrival_time + TIME_EPS:
        raise ScheduleExhausted(f"t={t} is past the final waypoint")
    targets, v = reference_configuration(nominal, schedule, t, frame)
    if leaders is not None:
        targets = targets[list(leaders)]
    return targets, v


# ---------------------------------------------------------------------------
# state

@dataclass(frozen=True)
class FormationState:
    positions: np.ndarray
    velocities: np.ndarray
    alive: np.ndarray
    graph: FormationGraph
    stress: StressAssignment
    nominal: np.ndarray
    schedule: ReferenceSchedule
    params: ControllerParams = ControllerParams()
    frame: np.ndarray = None
    tick: int = 0
    time: float = 0.0
    pending: tuple = ()
    failure_cost: str = "heading_align"
    record_timing: bool = False
    applied: tuple = ()     # event records applied at this tick

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]

    def role(self, i):
        return "leader" if i in self.graph.leaders else "follower"

    def agent(self, i) -> AgentState:
        return AgentState(i, self.positions[i].copy(), self.velocities[i].copy(),
                          self.role(i), bool(self.alive[i]))

    @property
    def agents(self):
        return [self.agent(i) for i in range(self.n)]

    def targets(self):
        return reference_configuration(self.nominal, self.schedule, self.time, self.frame)[0]

    def tracking_error(self):
        """``x - x_bar`` per agent; rows of dead agents are NaN."""
        err = self.positions - self.targets()
        err[~self.alive] = np.nan
        return err


def initial_state(nominal, graph, stress, schedule, *, params=ControllerParams(),
                  events=(), positions=None, failure_cost="heading_align",
                  record_timing=False) -> FormationState:
    """State at tick 0 with events due at t = 0 already applied."""
    nominal = np.array(nominal, float)
    n, d = nominal.shape
    pos = nominal.copy() if positions is None else np.array(positions, float)
    state = FormationState(
        positions=pos, velocities=np.zeros((n, d)), alive=np.ones(n, bool),
        graph=graph, stress=stress, nominal=nominal, schedule=schedule, params=params,
        frame=np.eye(d), pending=tuple(sorted(events, key=lambda e: e.time_s)),
        failure_cost=failure_cost, record_timing=record_timing,
    )
    return _apply_due_events(state)


def _saturate(v, cap):
    s = np.linalg.norm(v)
    return v * (cap / s) if s > cap else v


def follower_velocity(state: FormationState, i: int, leader_velocities=None):
    """Consensus-law velocity of follower ``i``; dead neighbors are ignored.

    ``leader_velocities`` (this tick's leader commands) replaces the
    last-tick velocities of leader neighbors when given.
    """
    vel = state.velocities if leader_velocities is None else leader_velocities
    num_x = np.zeros(state.d)
    num_v = np.zeros(state.d)
    total = 0.0
    for j in state.graph.in_neighbors(i):
        if not state.alive[j]:
            continue
        w = state.stress.weights[(j, i)]
        total += w
        num_x += w * state.positions[j]
        num_v += w * vel[j]
    if total == 0.0:
        raise ZeroWeightSum(f"follower {i} has zero total in-weight")
    k_p = state.params.k_p
    v = -k_p * (state.positions[i] - num_x / total) + num_v / total
    return _saturate(v, state.params.speed_cap)


def follower_step(state: FormationState, i: int, dt: float) -> AgentState:
    if i in state.graph.leaders or not state.alive[i]:
        raise ValueError(f"agent {i} is not an alive follower")
    v = follower_velocity(state, i)
    return AgentState(i, state.positions[i] + v * dt, v, "follower", True)


def _velocities(state: FormationState):
    targets, vref = reference_configuration(state.nominal, state.schedule, state.time,
                                            state.frame)
    p = state.params
    V = np.zeros_like(state.positions)
    for i in state.graph.leaders:
        if state.alive[i]:
            V[i] = _saturate(vref + p.k_l * (targets[i] - state.positions[i]), p.speed_cap)
    ff = None
    if p.feedforward == "leaders_current":
        ff = state.velocities.copy()
        ff[list(state.graph.leaders)] = V[list(state.graph.leaders)]
    for i in state.graph.followers:
        if state.alive[i]:
            V[i] = follower_velocity(state, i, ff)
    return V


def step(state: FormationState, dt: float) -> FormationState:
    """Advance one tick; events due at the new tick are applied at its end.

    Applied events therefore precede the dynamics computed from that tick.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    V = _velocities(state)
    nxt = replace(state, positions=state.positions + V * dt, velocities=V,
                  tick=state.tick + 1, time=(state.tick + 1) * dt, applied=())
    return _apply_due_events(nxt)


# ---------------------------------------------------------------------------
# event application

def _cost_context(state: FormationState, realign: bool):
    sch, t = state.schedule, state.time
    H = sch.heading_matrix(t)
    S = sch.transform_at(t)
    K = np.eye(state.d) if realign else state.frame
    return CostContext(goal_direction=sch.goal_direction(t),
                       next_waypoint=sch.next_waypoint(t),
                       body=H @ S.A @ K, offset=H @ S.b)


def _apply_plan(state, plan, *, realign, trigger, cost_name):
    A = plan.assignment.transform.A
    frame = np.eye(state.d) if realign else state.frame @ np.linalg.inv(A)
    rec = {
        "kind": "reorganize",
        "trigger": trigger,
        "old_leaders": list(state.graph.leaders),
        "new_leaders": list(plan.new_leaders),
        "cost_name": cost_name,
        "cost": plan.cost,
        "realign": bool(realign),
        "localizable": bool(plan.report.localizable),
        "switch_latency_s": plan.switch_latency if state.record_timing else None,
    }
    new = replace(state, graph=plan.new_graph, stress=plan.new_stress,
                  nominal=plan.new_nominal, frame=frame)
    return new, rec


def _identity_assignment(state):
    d = state.d
    return RoleAssignment(tuple(state.graph.leaders), tuple(range(state.n)),
                          AffineTransform.identity(d), 0.0)


def _apply_event(state: FormationState, ev):
    if isinstance(ev, TransformEvent):
        return state, [{"kind": "transform", "time_s": ev.time_s,
                        "A": ev.transform.A.tolist(), "b": ev.transform.b.tolist()}]

    if isinstance(ev, ReorganizeEvent):
        realign = state.schedule.heading == "follow"
        if ev.leaders is not None:
            plan = reorganize(state, ev.leaders)
            cost_name = None
        else:
            plan = auto_reorganize(state, ev.cost, _cost_context(state, realign))
            cost_name = ev.cost
        state, rec = _apply_plan(state, plan, realign=realign, trigger="scheduled",
                                 cost_name=cost_name)
        rec["time_s"] = ev.time_s
        return state, [rec]

    if isinstance(ev, FailEvent):
        i = int(ev.agent)
        alive = state.alive.copy()
        alive[i] = False
        vel = state.velocities.copy()
        vel[i] = 0.0
        was_leader = i in state.graph.leaders
        state = replace(state, alive=alive, velocities=vel)
        records = [{"kind": "fail", "time_s": ev.time_s, "agent": i,
                    "was_leader": was_leader}]
        depends = any(i in state.graph.in_neighbors(f) for f in state.graph.followers
                      if alive[f])
        if was_leader:
            try:
                plan = auto_reorganize(state, state.failure_cost,
                                       _cost_context(state, False))
            except NoViableAssignment as exc:
                raise NoViableAssignment(
                    f"leader {i} failed and no viable reassignment remains") from exc
            state, rec = _apply_plan(state, plan, realign=False, trigger="failure",
                                     cost_name=state.failure_cost)
            records.append(rec)
        elif depends:
            plan = plan_for_assignment(state, _identity_assignment(state))
            state, rec = _apply_plan(state, plan, realign=False, trigger="failure",
                                     cost_name=None)
            records.append(rec)
        return state, records

    raise TypeError(f"unknown event {ev!r}")


def _apply_due_events(state: FormationState) -> FormationState:
    applied = list(state.applied)
    pending = list(state.pending)
    while pending and pending[0].time_s <= state.time + TIME_EPS:
        ev = pending.pop(0)
        state, recs = _apply_event(state, ev)
        for r in recs:
            r["tick"] = state.tick
        applied.extend(recs)
    return replace(state, pending=tuple(pending), applied=tuple(applied))
