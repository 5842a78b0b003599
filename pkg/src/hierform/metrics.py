"""Trace summaries and the follower error-propagation probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .exceptions import NotLocalizable
from .graph import FormationGraph, build_graph
from .reorganizer import affine_weight_stress, power_centric_topology
from .stress import is_affinely_localizable, partition_stress

MIN_DRAWS = 1000


def _spread(x):
    return float(np.max(x) - np.min(x)) if len(x) else 0.0


def follower_rms(trace):
    """Per-tick RMS tracking error over alive followers, in meters."""
    out = []
    for r in trace.records:
        sq = [np.sum(np.square(a["err"])) for a in r["agents"]
              if a["role"] == "follower" and a["alive"]]
        out.append(float(np.sqrt(np.mean(sq))) if sq else 0.0)
    return out


def metrics(trace) -> dict:
    """Summary of a trace.

    Path length is the sum of per-tick displacement norms; mean speed is
    the average commanded speed over ticks ``1..T`` (equal to path length
    over duration). Spreads are max minus min over the agents alive at the
    end of the run. Everything is a deterministic function of the records.
    """
    P = trace.positions()
    V = trace.velocities()
    alive_end = trace.alive()[-1]
    T = len(trace.records) - 1
    steps = np.linalg.norm(np.diff(P, axis=0), axis=2) if T else np.zeros((0, trace.n))
    path = steps.sum(axis=0) if T else np.zeros(trace.n)
    speeds = np.linalg.norm(V[1:], axis=2) if T else np.zeros((0, trace.n))
    mean_speed = speeds.mean(axis=0) if T else np.zeros(trace.n)
    max_speed = speeds.max(axis=0) if T else np.zeros(trace.n)

    rms = follower_rms(trace)
    reorgs = [e for e in trace.events() if e["kind"] == "reorganize"]
    fails = {e["tick"]: e for e in trace.events() if e["kind"] == "fail"}

    arrival = trace.header.get("arrival_time_s")
    times = trace.times()
    arrival_tick = None
    if arrival is not None and len(times):
        hit = np.nonzero(times >= arrival - 1e-9)[0]
        arrival_tick = int(hit[0]) if hit.size else None

    return {
        "n_ticks": T,
        "duration_s": float(times[-1]) if len(times) else 0.0,
        "path_length_m": path.tolist(),
        "mean_speed_mps": mean_speed.tolist(),
        "max_speed_mps": max_speed.tolist(),
        "path_length_spread_m": _spread(path[alive_end]),
        "mean_speed_spread_mps": _spread(mean_speed[alive_end]),
        "peak_speed_mps": float(max_speed.max()) if T else 0.0,
        "follower_rms_error_m": rms,
        "final_follower_rms_error_m": rms[-1] if rms else 0.0,
        "arrival_tick": arrival_tick,
        "arrival_follower_rms_error_m": None if arrival_tick is None else rms[arrival_tick],
        "n_reorganizations": len(reorgs),
        "reorganization_ticks": [e["tick"] for e in reorgs],
        "reorganization_latency_s": [e["switch_latency_s"] for e in reorgs],
        "failure_to_reorganization_ticks": [
            min((e["tick"] - t for e in reorgs if e["tick"] >= t), default=None)
            for t in sorted(fails)
            if fails[t]["was_leader"]],
        "localizable_after_reorganization": all(e["localizable"] for e in reorgs),
    }


# ---------------------------------------------------------------------------
# error propagation

def leader_only_topology(leaders, followers, d) -> FormationGraph:
    return power_centric_topology(leaders, followers, d)


def follower_chain_topology(leaders, followers, d, *, drop=0) -> FormationGraph:
    """A localizable topology in which followers depend on followers.

    The first follower hears every leader; each later follower hears the
    previous follower and every leader except ``leaders[drop]``.
    """
    leaders = [int(i) for i in leaders]
    followers = [int(i) for i in followers]
    kept = [l for k, l in enumerate(leaders) if k != drop]
    edges = [(a, b) for a in leaders for b in leaders if a != b]
    for k, f in enumerate(followers):
        src = leaders if k == 0 else kept + [followers[k - 1]]
        edges += [(j, f) for j in src]
    return build_graph(len(leaders) + len(followers), d, edges, leaders)


@dataclass(frozen=True)
class ProbeResult:
    rms: float                  # m, RMS follower target-position error
    mean_sq: np.ndarray         # per-draw mean squared error (m^2)

    @property
    def stderr(self):
        """Standard error of ``rms`` by the delta method."""
        if self.rms == 0:
            return 0.0
        return float(np.std(self.mean_sq, ddof=1) / np.sqrt(len(self.mean_sq)) / (2 * self.rms))


def error_propagation_probe(state, leader_noise_sigma, topologies, *, n_draws=2000,
                            seed=0) -> dict:
    """Monte-Carlo RMS of follower target errors under position noise.

    Every agent's position carries i.i.d. ``N(0, sigma^2)`` noise per axis.
    At steady state a follower sits at the stress-weighted combination of
    its neighbors plus its own noise, so errors compound along follower
    chains: ``Omega_ff e_f = diag(Omega_ff) xi_f - Omega_fl xi_l``. The
    target error is ``e_f - xi_f``. ``state`` supplies ``nominal`` and the
    leader set (``state.graph.leaders``); ``topologies`` maps names to
    graphs with those leaders. All topologies see the same noise draws.
    """
    if n_draws < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} draws, got {n_draws}")
    if leader_noise_sigma < 0:
        raise ValueError("sigma must be non-negative")
    nominal = np.asarray(state.nominal, float)
    n, d = nominal.shape
    if not isinstance(topologies, dict):
        topologies = {f"topology_{k}": g for k, g in enumerate(topologies)}
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_draws, n, d)) * float(leader_noise_sigma)

    out = {}
    for name, g in topologies.items():
        s = affine_weight_stress(g, nominal)
        if not is_affinely_localizable(s).localizable:
            raise NotLocalizable(f"topology {name!r} is not affinely localizable")
        b = partition_stress(s)
        L, F = list(g.leaders), list(g.followers)
        xf = xi[:, F, :]
        rhs = np.diag(b.ff)[None, :, None] * xf - np.einsum("fl,kld->kfd", b.fl, xi[:, L, :])
        ef = np.linalg.solve(b.ff[None], rhs)
        tau = ef - xf
        mean_sq = np.mean(np.sum(tau ** 2, axis=2), axis=1)
        out[name] = ProbeResult(float(np.sqrt(np.mean(mean_sq))), mean_sq)
    return out


def paired_one_sided_test(better: ProbeResult, worse: ProbeResult, confidence=0.95):
    """Paired z-test that ``better`` has lower mean squared error than ``worse``.

    Returns ``(holds, p_value)``; ``holds`` is true when the null of equal
    or reversed error is rejected at ``confidence``. Identical results
    (including the zero-noise case) count as holding with ``p = 0`` for
    equality, since ``better <= worse`` is then exact.
    """
    diff = worse.mean_sq - better.mean_sq
    sd = float(np.std(diff, ddof=1))
    if sd == 0:
        return bool(np.mean(diff) >= 0), 0.0 if np.mean(diff) >= 0 else 1.0
    z = float(np.mean(diff)) / (sd / np.sqrt(len(diff)))
    p = float(norm.sf(z))
    return p < 1 - confidence, p
