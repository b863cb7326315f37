"""Scenario configuration: INI loading, defaulting, validation and round-trip dumping.

Layout of a scenario file (every key optional except ``swarm.n_agents``)::

    [swarm]
    n_agents = 7
    agent_speed = 2.0
    follower_speed_factor = 1.3
    dt = 0.1
    mode = dfrpsr            ; or baseline
    max_time = 400
    seed = 0

    [formation]
    spacing = 10
    half_angle = 0.785398    ; radians

    [sensing]
    detection_range = 30

    [reshape]
    safe_dist = 7            ; defaults to 2 * clearance + 1
    queue_gap = 5
    clearance = 3
    agent_separation = 3
    obstacle_margin = 1

    [turnback]
    turnback_tol = 0.5
    anneal_t0 = auto
    anneal_decay = 0.93
    anneal_final_ratio = 1e-6
    anneal_max_iter = 200
    anneal_tol = 1e-6

    [mission]
    start = 0, 0
    start_heading = 0
    destination = 250, 0
    arrival_radius = 2

    [obstacle.1]
    vertices = 100 3; 116 3; 116 23; 100 23
"""
from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .core import Obstacle, Pose, Vec2, check_convex_ccw
from .formation import FormationSpec
from .registration import AnnealSchedule


class SimMode(str, enum.Enum):
    DFRPSR = "dfrpsr"
    BASELINE = "baseline"


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` names the offending entry (``section.key``)."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ScenarioConfig:
    n_agents: int
    formation: FormationSpec
    agent_speed: float = 2.0
    follower_speed_factor: float = 1.3
    dt: float = 0.1
    detection_range: float = 30.0
    safe_dist: float = 7.0
    queue_gap: float = 5.0
    clearance: float = 3.0
    agent_separation: float = 3.0
    obstacle_margin: float = 1.0
    arrival_radius: float = 2.0
    turnback_tol: float = 0.5
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    obstacles: tuple[tuple[tuple[float, float], ...], ...] = ()
    start_leader_pose: Pose = field(default_factory=lambda: Pose(Vec2(0.0, 0.0), 0.0))
    destination: Vec2 = field(default_factory=lambda: Vec2(250.0, 0.0))
    mode: SimMode = SimMode.DFRPSR
    max_time: float = 400.0
    seed: int = 0

    def __post_init__(self) -> None:
        validate(self)

    def build_obstacles(self) -> tuple[Obstacle, ...]:
        return tuple(Obstacle(i + 1, tuple(Vec2(*v) for v in verts))
                     for i, verts in enumerate(self.obstacles))

    def follower_speed(self) -> float:
        return self.agent_speed * self.follower_speed_factor


_POSITIVE = {
    "agent_speed": "swarm.agent_speed",
    "detection_range": "sensing.detection_range",
    "safe_dist": "reshape.safe_dist",
    "queue_gap": "reshape.queue_gap",
    "clearance": "reshape.clearance",
    "agent_separation": "reshape.agent_separation",
    "obstacle_margin": "reshape.obstacle_margin",
    "arrival_radius": "mission.arrival_radius",
    "turnback_tol": "turnback.turnback_tol",
    "max_time": "swarm.max_time",
}


def validate(cfg: ScenarioConfig) -> None:
    if cfg.n_agents < 1:
        raise ScenarioError("swarm.n_agents", f"must be >= 1, got {cfg.n_agents}")
    if cfg.formation.n_agents != cfg.n_agents:
        raise ScenarioError("formation", "formation size differs from swarm.n_agents")
    for attr, name in _POSITIVE.items():
        value = getattr(cfg, attr)
        if not (math.isfinite(value) and value > 0.0):
            raise ScenarioError(name, f"must be positive and finite, got {value}")
    if not 0.0 < cfg.dt <= 1.0:
        raise ScenarioError("swarm.dt", f"must lie in (0, 1], got {cfg.dt}")
    if not (math.isfinite(cfg.follower_speed_factor) and cfg.follower_speed_factor >= 1.0):
        raise ScenarioError("swarm.follower_speed_factor", f"must be >= 1, got {cfg.follower_speed_factor}")
    for i, verts in enumerate(cfg.obstacles):
        try:
            check_convex_ccw([Vec2(*v) for v in verts])
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"obstacle[{i}]", str(exc)) from None


def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ScenarioError(name, f"expected numbers, got {text!r}") from None


def _point(text: str, name: str) -> Vec2:
    vals = _floats(text, name)
    if len(vals) != 2:
        raise ScenarioError(name, f"expected 'x, y', got {text!r}")
    try:
        return Vec2(*vals)
    except ValueError as exc:
        raise ScenarioError(name, str(exc)) from None


def _vertices(text: str, name: str) -> tuple[tuple[float, float], ...]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = _floats(chunk, name)
            if len(vals) != 2:
                raise ScenarioError(name, f"vertex {chunk.strip()!r} is not 'x y'")
            out.append((vals[0], vals[1]))
    return tuple(out)


class _Reader:
    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser

    def get(self, section: str, key: str, conv, default):
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key)
        name = f"{section}.{key}"
        try:
            return conv(raw)
        except ScenarioError:
            raise
        except (ValueError, TypeError):
            raise ScenarioError(name, f"cannot parse {raw!r}") from None


_KNOWN = {
    "swarm": {"n_agents", "agent_speed", "follower_speed_factor", "dt", "mode", "max_time", "seed"},
    "formation": {"spacing", "half_angle"},
    "sensing": {"detection_range"},
    "reshape": {"safe_dist", "queue_gap", "clearance", "agent_separation", "obstacle_margin"},
    "turnback": {"turnback_tol", "anneal_t0", "anneal_decay", "anneal_final_ratio",
                 "anneal_max_iter", "anneal_tol"},
    "mission": {"start", "start_heading", "destination", "arrival_radius"},
}


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError("file", f"parse error: {exc}") from None
    for section in parser.sections():
        if section.startswith("obstacle."):
            continue
        if section not in _KNOWN:
            raise ScenarioError(section, "unknown section")
        for key in parser.options(section):
            if key not in _KNOWN[section]:
                raise ScenarioError(f"{section}.{key}", "unknown key")
    if not parser.has_option("swarm", "n_agents"):
        raise ScenarioError("swarm.n_agents", "required")
    r = _Reader(parser)
    n = r.get("swarm", "n_agents", int, None)

    def mode_of(raw: str) -> SimMode:
        try:
            return SimMode(raw.strip().lower())
        except ValueError:
            raise ScenarioError("swarm.mode", f"expected dfrpsr or baseline, got {raw!r}") from None

    try:
        formation = FormationSpec(
            n_agents=n,
            spacing=r.get("formation", "spacing", float, 10.0),
            half_angle=r.get("formation", "half_angle", float, math.pi / 4),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("formation", str(exc)) from None

    t0_raw = r.get("turnback", "anneal_t0", str, "auto").strip().lower()
    try:
        anneal = AnnealSchedule(
            t0=None if t0_raw == "auto" else float(t0_raw),
            decay=r.get("turnback", "anneal_decay", float, 0.93),
            final_ratio=r.get("turnback", "anneal_final_ratio", float, 1e-6),
            max_iter=r.get("turnback", "anneal_max_iter", int, 200),
            tol=r.get("turnback", "anneal_tol", float, 1e-6),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("turnback", str(exc)) from None

    obstacle_sections = sorted(
        (s for s in parser.sections() if s.startswith("obstacle.")),
        key=lambda s: (len(s), s),
    )
    obstacles = []
    for s in obstacle_sections:
        if not parser.has_option(s, "vertices"):
            raise ScenarioError(f"{s}.vertices", "required")
        obstacles.append(_vertices(parser.get(s, "vertices"), f"{s}.vertices"))

    clearance = r.get("reshape", "clearance", float, 3.0)
    start = r.get("mission", "start", lambda t: _point(t, "mission.start"), Vec2(0.0, 0.0))
    heading = r.get("mission", "start_heading", float, 0.0)
    if not math.isfinite(heading):
        raise ScenarioError("mission.start_heading", "must be finite")
    return ScenarioConfig(
        n_agents=n,
        formation=formation,
        agent_speed=r.get("swarm", "agent_speed", float, 2.0),
        follower_speed_factor=r.get("swarm", "follower_speed_factor", float, 1.3),
        dt=r.get("swarm", "dt", float, 0.1),
        detection_range=r.get("sensing", "detection_range", float, 30.0),
        safe_dist=r.get("reshape", "safe_dist", float, 2.0 * clearance + 1.0),
        queue_gap=r.get("reshape", "queue_gap", float, 5.0),
        clearance=clearance,
        agent_separation=r.get("reshape", "agent_separation", float, 3.0),
        obstacle_margin=r.get("reshape", "obstacle_margin", float, 1.0),
        arrival_radius=r.get("mission", "arrival_radius", float, 2.0),
        turnback_tol=r.get("turnback", "turnback_tol", float, 0.5),
        anneal=anneal,
        obstacles=tuple(obstacles),
        start_leader_pose=Pose(start, heading),
        destination=r.get("mission", "destination", lambda t: _point(t, "mission.destination"),
                          Vec2(250.0, 0.0)),
        mode=r.get("swarm", "mode", mode_of, SimMode.DFRPSR),
        max_time=r.get("swarm", "max_time", float, 400.0),
        seed=r.get("swarm", "seed", int, 0),
    )


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("file", f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_scenario(text, source=str(path))


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Serialize ``cfg`` so that ``parse_scenario`` reproduces it exactly."""
    f = repr  # repr round-trips floats exactly
    a = cfg.anneal
    lines = [
        "[swarm]",
        f"n_agents = {cfg.n_agents}",
        f"agent_speed = {f(cfg.agent_speed)}",
        f"follower_speed_factor = {f(cfg.follower_speed_factor)}",
        f"dt = {f(cfg.dt)}",
        f"mode = {cfg.mode.value}",
        f"max_time = {f(cfg.max_time)}",
        f"seed = {cfg.seed}",
        "",
        "[formation]",
        f"spacing = {f(cfg.formation.spacing)}",
        f"half_angle = {f(cfg.formation.half_angle)}",
        "",
        "[sensing]",
        f"detection_range = {f(cfg.detection_range)}",
        "",
        "[reshape]",
        f"safe_dist = {f(cfg.safe_dist)}",
        f"queue_gap = {f(cfg.queue_gap)}",
        f"clearance = {f(cfg.clearance)}",
        f"agent_separation = {f(cfg.agent_separation)}",
        f"obstacle_margin = {f(cfg.obstacle_margin)}",
        "",
        "[turnback]",
        f"turnback_tol = {f(cfg.turnback_tol)}",
        f"anneal_t0 = {'auto' if a.t0 is None else f(a.t0)}",
        f"anneal_decay = {f(a.decay)}",
        f"anneal_final_ratio = {f(a.final_ratio)}",
        f"anneal_max_iter = {a.max_iter}",
        f"anneal_tol = {f(a.tol)}",
        "",
        "[mission]",
        f"start = {f(cfg.start_leader_pose.position.x)}, {f(cfg.start_leader_pose.position.y)}",
        f"start_heading = {f(cfg.start_leader_pose.heading)}",
        f"destination = {f(cfg.destination.x)}, {f(cfg.destination.y)}",
        f"arrival_radius = {f(cfg.arrival_radius)}",
    ]
    for i, verts in enumerate(cfg.obstacles):
        lines += ["", f"[obstacle.{i + 1}]",
                  "vertices = " + "; ".join(f"{f(x)} {f(y)}" for x, y in verts)]
    return "\n".join(lines) + "\n"


def reference_scenario_path() -> Path:
    return Path(__file__).parent / "data" / "reference.ini"


def load_reference(mode: Optional[SimMode] = None) -> ScenarioConfig:
    cfg = load_scenario(reference_scenario_path())
    if mode is not None and mode != cfg.mode:
        cfg = replace(cfg, mode=mode)
    return cfg
