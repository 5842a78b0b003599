"""Command-line front end.

Exit codes: 0 success, 1 validation or verification failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .exceptions import (FormationError, ParseError, ScenarioValidationError,
                         SchemaVersionMismatch)
from .geometry import enumerate_viable_assignments
from .metrics import (error_propagation_probe, follower_chain_topology,
                      leader_only_topology, metrics, paired_one_sided_test)
from .runner import run_scenario
from .scenario import corpus_names, corpus_path, load_scenario, verify_scenario
from .trace import read_trace, summary_path, write_csv, write_trace

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Invalid(Exception):
    """Verification failed; reported with exit code 1."""


def _resolve(spec: str) -> Path:
    p = Path(spec)
    if p.exists():
        return p
    if spec in corpus_names():
        return corpus_path(spec)
    raise FileNotFoundError(f"no scenario file or bundled scenario named {spec!r}")


def _load(spec, **kw):
    return load_scenario(_resolve(spec), **kw)


def _emit(args, payload, text):
    print(json.dumps(payload, indent=2, sort_keys=True) if args.json else text)


def _fmt_list(xs, fmt="{:.4f}"):
    return "[" + ", ".join(fmt.format(x) for x in xs) + "]"


def cmd_run(args):
    s = _load(args.scenario)
    trace = run_scenario(s, dt=args.dt, seed=args.seed, record_timing=args.record_timing)
    m = trace.summary
    payload = {"scenario": s.name, "trace_sha256": trace.digest(), "n_ticks": m["n_ticks"],
               "n_reorganizations": m["n_reorganizations"],
               "path_length_spread_m": m["path_length_spread_m"],
               "mean_speed_spread_mps": m["mean_speed_spread_mps"],
               "final_follower_rms_error_m": m["final_follower_rms_error_m"]}
    if args.out:
        out = Path(args.out)
        path = write_trace(trace, out / f"{trace.header['scenario']}.jsonl")
        payload["trace"] = str(path)
        payload["summary"] = str(summary_path(path))
        if args.csv:
            payload["csv"] = str(write_csv(trace, out / f"{trace.header['scenario']}.csv"))
    text = "\n".join(f"{k}: {v}" for k, v in payload.items())
    _emit(args, payload, text)


def cmd_verify(args):
    s = _load(args.scenario)
    r = verify_scenario(s)
    lines = [f"scenario {r['name']}: n={r['n']} d={r['d']} n_l={r['n_l']}",
             f"  affine span:      {'ok' if r['spans'] else 'FAIL'}",
             f"  {r['d'] + 1}-rooted:         {'ok' if r['rooted'] else 'FAIL'}"
             + (f" (roots {r['root_witness']})" if r['root_witness'] else ""),
             f"  localizable:      {'ok' if r['localizable'] else 'FAIL'}"
             + (f" ({r['stress_error']})" if r['stress_error'] else ""),
             f"  initial viable:   {'ok' if r['initial_viable'] else 'FAIL'}",
             f"  leader subsets (C({r['n']},{r['n_l']}) = {len(r['subsets'])}):"]
    for sub in r["subsets"]:
        lines.append(f"    {sub['leaders']}: spans={sub['spans']} viable={sub['viable']}")
    lines.append("verify: OK" if r["ok"] else "verify: FAILED")
    _emit(args, r, "\n".join(lines))
    if not r["ok"]:
        raise _Invalid("verification failed")


def cmd_enumerate(args):
    s = _load(args.scenario, geometric=False)
    n_l = args.nl if args.nl is not None else len(s.graph.leaders)
    slots = s.graph.leaders if n_l == len(s.graph.leaders) else None
    viable = enumerate_viable_assignments(s.nominal_array(), n_l, leader_slots=slots)
    rows = [{"leaders": list(a.leaders), "permutation": list(a.permutation),
             "A": a.transform.A.tolist(), "b": a.transform.b.tolist(),
             "residual": a.residual} for a in viable]
    lines = [f"{len(rows)} viable assignments (n_l={n_l})"]
    for r in rows:
        lines.append(f"  leaders={r['leaders']} permutation={r['permutation']} "
                     f"residual={r['residual']:.2e}")
    if not rows:
        _emit(args, {"assignments": []}, "no viable assignments")
        raise _Invalid("no viable assignments")
    _emit(args, {"assignments": rows}, "\n".join(lines))


def cmd_probe(args):
    s = _load(args.scenario)
    state = s.initial_state()
    leaders, followers, d = state.graph.leaders, state.graph.followers, s.d
    topologies = {"leader_only": leader_only_topology(leaders, followers, d),
                  "follower_chain": follower_chain_topology(leaders, followers, d)}
    res = error_propagation_probe(state, args.sigma, topologies, n_draws=args.draws,
                                  seed=args.seed)
    holds, p = paired_one_sided_test(res["leader_only"], res["follower_chain"])
    payload = {"sigma_m": args.sigma, "draws": args.draws,
               "rms_m": {k: v.rms for k, v in res.items()},
               "leader_only_le_chain": holds, "p_value": p}
    text = "\n".join([f"sigma = {args.sigma} m, {args.draws} draws"]
                     + [f"  {k:15s} rms = {v.rms:.6e} m" for k, v in res.items()]
                     + [f"  leader_only <= follower_chain at 95%: {holds} (p = {p:.3g})"])
    _emit(args, payload, text)


def cmd_metrics(args):
    trace = read_trace(args.trace)
    m = metrics(trace)
    if trace.summary is not None:
        m["stored_summary_matches"] = _close(m, trace.summary)
    lines = [f"trace {trace.header['scenario']} ({m['n_ticks']} ticks, {m['duration_s']:.2f} s)",
             f"  path length (m):       {_fmt_list(m['path_length_m'])}",
             f"  mean speed (m/s):      {_fmt_list(m['mean_speed_mps'])}",
             f"  max speed (m/s):       {_fmt_list(m['max_speed_mps'])}",
             f"  path spread (m):       {m['path_length_spread_m']:.4f}",
             f"  speed spread (m/s):    {m['mean_speed_spread_mps']:.4f}",
             f"  final follower RMS (m): {m['final_follower_rms_error_m']:.3e}",
             f"  reorganizations:       {m['n_reorganizations']} at ticks "
             f"{m['reorganization_ticks']}"]
    if "stored_summary_matches" in m:
        lines.append(f"  stored summary matches: {m['stored_summary_matches']}")
    payload = {k: v for k, v in m.items() if k != "follower_rms_error_m"}
    _emit(args, payload, "\n".join(lines))


def _close(a, b, tol=1e-12):
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() <= b.keys() and all(
            _close(a[k], b[k], tol) for k in a if k != "stored_summary_matches")
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(
            _close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, (int, float)):
        return bool(np.isclose(a, b, rtol=tol, atol=tol))
    return a == b


def build_parser():
    p = argparse.ArgumentParser(prog="hierform", description=__doc__.splitlines()[0])
    p.add_argument("--json", action="store_true", help="machine-readable output")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario")
    r.add_argument("scenario", help="scenario file or bundled scenario name")
    r.add_argument("--out", help="directory for trace, summary (and CSV)")
    r.add_argument("--dt", type=float, help="override the time step (s)")
    r.add_argument("--seed", type=int, help="override the seed")
    r.add_argument("--csv", action="store_true", help="also write the CSV projection")
    r.add_argument("--record-timing", action="store_true",
                   help="store wall-clock switch latencies (breaks byte-identical reruns)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check span, rootedness, localizability and viability")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("enumerate", help="list viable leader assignments")
    e.add_argument("scenario")
    e.add_argument("--nl", type=int, help="leader count (default: the scenario's)")
    e.set_defaults(func=cmd_enumerate)

    pr = sub.add_parser("probe", help="compare follower error propagation across topologies")
    pr.add_argument("scenario")
    pr.add_argument("--sigma", type=float, required=True, help="noise sigma (m)")
    pr.add_argument("--draws", type=int, default=2000)
    pr.add_argument("--seed", type=int, default=0)
    pr.set_defaults(func=cmd_probe)

    m = sub.add_parser("metrics", help="summary table for a trace file")
    m.add_argument("trace")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except _Invalid:
        return EXIT_INVALID
    except ScenarioValidationError as exc:
        print(f"error: invalid scenario\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ParseError, SchemaVersionMismatch) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FormationError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
