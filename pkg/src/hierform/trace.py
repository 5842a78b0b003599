"""Simulation traces and their on-disk form.

A trace file is JSON lines: one header line, then one record per tick::

    {"tick": k, "time_s": t, "agents": [{"id", "role", "alive", "pos", "vel", "err"}],
     "events": [...]}

``err`` is ``null`` for failed agents. The summary metrics live in a
sibling ``<stem>.summary.json``; :func:`write_csv` gives a flat
one-row-per-agent-per-tick projection for plotting.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ParseError, SchemaVersionMismatch

TRACE_SCHEMA = 1
TRACE_KIND = "hierform-trace"


@dataclass
class Trace:
    header: dict
    records: list = field(default_factory=list)
    summary: dict | None = None

    @property
    def n(self):
        return int(self.header["n"])

    @property
    def d(self):
        return int(self.header["d"])

    def positions(self):
        """``(T + 1, n, d)`` array of positions."""
        return np.array([[a["pos"] for a in r["agents"]] for r in self.records], float)

    def velocities(self):
        return np.array([[a["vel"] for a in r["agents"]] for r in self.records], float)

    def alive(self):
        return np.array([[a["alive"] for a in r["agents"]] for r in self.records], bool)

    def roles(self):
        return [[a["role"] for a in r["agents"]] for r in self.records]

    def errors(self):
        """Tracking errors with NaN rows for failed agents."""
        nan = [float("nan")] * self.d
        return np.array([[nan if a["err"] is None else a["err"] for a in r["agents"]]
                         for r in self.records], float)

    def times(self):
        return np.array([r["time_s"] for r in self.records], float)

    def events(self):
        return [e for r in self.records for e in r["events"]]

    def digest(self) -> str:
        """sha256 of the serialized trace lines."""
        h = hashlib.sha256()
        for line in _lines(self):
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _lines(trace: Trace):
    yield _dump(trace.header)
    for r in trace.records:
        yield _dump(r)


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".summary.json")


def write_trace(trace: Trace, path) -> Path:
    """Write ``trace`` (and its summary, if any) and return the trace path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for line in _lines(trace):
            fh.write(line)
            fh.write("\n")
    if trace.summary is not None:
        summary_path(path).write_text(json.dumps(trace.summary, sort_keys=True, indent=2,
                                                 allow_nan=False) + "\n")
    return path


def read_trace(path) -> Trace:
    """Read a trace written by :func:`write_trace`.

    Raises :class:`SchemaVersionMismatch` for foreign or newer files and
    :class:`ParseError` for malformed or truncated ones; a partial trace is
    never returned.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.endswith("\n"):
        raise ParseError(f"{path}: truncated trace (missing final newline)")
    lines = text.split("\n")[:-1]
    if not lines:
        raise ParseError(f"{path}: empty trace file")
    try:
        rows = [json.loads(line) for line in lines]
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed trace line: {exc}") from None
    header = rows[0]
    if not isinstance(header, dict) or header.get("kind") != TRACE_KIND:
        raise SchemaVersionMismatch(f"{path}: not a trace file")
    if header.get("schema") != TRACE_SCHEMA:
        raise SchemaVersionMismatch(
            f"{path}: trace schema {header.get('schema')!r}, expected {TRACE_SCHEMA}")
    records = rows[1:]
    expected = int(header["n_ticks"]) + 1
    if len(records) != expected:
        raise ParseError(f"{path}: truncated trace ({len(records)} of {expected} records)")
    for k, r in enumerate(records):
        if not isinstance(r, dict) or r.get("tick") != k:
            raise ParseError(f"{path}: record {k} out of order")
    sp = summary_path(path)
    summary = json.loads(sp.read_text()) if sp.exists() else None
    return Trace(header, records, summary)


def write_csv(trace: Trace, path) -> Path:
    """One row per agent per tick: tick, time, id, role, alive, position, velocity, error."""
    path = Path(path)
    axes = "xyz"[:trace.d]
    cols = (["tick", "time_s", "id", "role", "alive"] + [f"pos_{a}" for a in axes]
            + [f"vel_{a}" for a in axes] + [f"err_{a}" for a in axes])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in trace.records:
            for a in r["agents"]:
                err = a["err"] if a["err"] is not None else [""] * trace.d
                w.writerow([r["tick"], repr(r["time_s"]), a["id"], a["role"], int(a["alive"])]
                           + [repr(x) for x in a["pos"]] + [repr(x) for x in a["vel"]]
                           + [x if x == "" else repr(x) for x in err])
    return path
