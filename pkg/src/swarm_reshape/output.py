"""Result files: trajectories, leader distances, events and a statistics summary.

Every float is written with six decimals so that identical runs give
byte-identical files.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from .engine import EventKind, SimulationResult

TRAJECTORIES = "trajectories.csv"
DISTANCES = "distances.csv"
EVENTS = "events.csv"
SUMMARY = "summary.json"


def fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot format non-finite value {x}")
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def atomic_write(path: Path, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path``, then rename it into place."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats in fixed six-decimal form and keys in insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def distance_records(result: SimulationResult) -> list[tuple[float, int, int, float]]:
    """(time, follower, effective leader, distance) for every follower at every tick."""
    rows = []
    for w in result.worlds:
        for a in w.agents[1:]:
            lead = w.agent(a.effective_leader_id)
            rows.append((w.time, a.id, lead.id, a.position.dist(lead.position)))
    return rows


def pair_statistics(records: Iterable[tuple[float, int, int, float]]) -> dict[str, dict[str, Any]]:
    by_pair: dict[tuple[int, int], list[float]] = {}
    for _, f, l, d in records:
        by_pair.setdefault((f, l), []).append(d)
    out = {}
    for (f, l) in sorted(by_pair):
        v = np.asarray(by_pair[(f, l)])
        p25, med, p75 = np.percentile(v, [25.0, 50.0, 75.0])
        out[f"{f}-{l}"] = {
            "follower_id": f,
            "leader_id": l,
            "samples": int(v.size),
            "min": float(v.min()),
            "p25": float(p25),
            "median": float(med),
            "p75": float(p75),
            "max": float(v.max()),
        }
    return out


def summary(result: SimulationResult, records: Optional[list] = None) -> dict[str, Any]:
    if records is None:
        records = distance_records(result)
    cfg = result.config
    return {
        "mode": cfg.mode.value,
        "n_agents": cfg.n_agents,
        "complete": result.complete,
        "ticks": len(result.worlds),
        "final_time": result.worlds[-1].time,
        "reformation_time": result.first_time(EventKind.FORMATION_RESTORED),
        "passage_time": result.first_time(EventKind.PASSAGE_COMPLETE),
        "mission_time": result.first_time(EventKind.DESTINATION_REACHED),
        "events": {k.value: len(result.event_times(k)) for k in EventKind},
        "pairs": pair_statistics(records),
    }


def write_outputs(result: SimulationResult, out_dir: str | os.PathLike) -> dict[str, Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    lines = ["tick,time,agent_id,x,y,heading"]
    for w in result.worlds:
        t = fmt(w.time)
        for a in w.agents:
            p = a.position
            lines.append(f"{w.tick},{t},{a.id},{fmt(p.x)},{fmt(p.y)},{fmt(a.heading)}")
    traj = "\n".join(lines) + "\n"

    records = distance_records(result)
    lines = ["time,follower_id,leader_id,distance"]
    lines += [f"{fmt(t)},{f},{l},{fmt(d)}" for t, f, l, d in records]
    dist = "\n".join(lines) + "\n"

    lines = ["time,kind,agent_id"]
    lines += [f"{fmt(e.time)},{e.kind.value},{e.agent_id}" for e in result.events]
    events = "\n".join(lines) + "\n"

    paths = {name: out / name for name in (TRAJECTORIES, DISTANCES, EVENTS, SUMMARY)}
    atomic_write(paths[TRAJECTORIES], traj)
    atomic_write(paths[DISTANCES], dist)
    atomic_write(paths[EVENTS], events)
    atomic_write(paths[SUMMARY], dumps(summary(result, records)) + "\n")
    return paths
