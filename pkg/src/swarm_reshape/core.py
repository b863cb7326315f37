"""Geometric primitives, agent/world state and constant-speed kinematics."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite Vec2 ({self.x}, {self.y})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def dist(self, other: "Vec2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def unit(self) -> "Vec2":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero vector")
        return Vec2(self.x / n, self.y / n)

    def rotated(self, theta: float) -> "Vec2":
        c, s = math.cos(theta), math.sin(theta)
        return Vec2(c * self.x - s * self.y, s * self.x + c * self.y)

    def left_normal(self) -> "Vec2":
        return Vec2(-self.y, self.x)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def heading_vector(theta: float) -> Vec2:
    return Vec2(math.cos(theta), math.sin(theta))


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    if not math.isfinite(theta):
        raise ValueError(f"non-finite angle {theta}")
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True, slots=True)
class Pose:
    position: Vec2
    heading: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", wrap_angle(self.heading))


def bearing_from(pose: Pose, target: Vec2) -> float:
    """Signed angle from the pose heading to the ray toward ``target``.

    Positive is counterclockwise (target on the left), negative is clockwise
    (target on the right).
    """
    d = target - pose.position
    if d.x == 0.0 and d.y == 0.0:
        raise ValueError("target coincides with pose position")
    return wrap_angle(math.atan2(d.y, d.x) - pose.heading)


class Leg(str, enum.Enum):
    LEADER = "Leader"
    LEFT = "Left"
    RIGHT = "Right"


class Mode(str, enum.Enum):
    FORMATION = "Formation"
    QUEUE_TRANSITION = "QueueTransition"
    QUEUE = "Queue"
    TURN_BACK = "TurnBack"


def leg_of(agent_id: int) -> Leg:
    """Leg membership by id: 1 leads, even ids fly the left leg, odd ids the right."""
    if agent_id < 1:
        raise ValueError(f"agent id must be >= 1, got {agent_id}")
    if agent_id == 1:
        return Leg.LEADER
    return Leg.LEFT if agent_id % 2 == 0 else Leg.RIGHT


def permanent_leader_of(agent_id: int) -> Optional[int]:
    """Immediate leader inside the V: the previous agent on the same leg, or the apex."""
    if agent_id < 1:
        raise ValueError(f"agent id must be >= 1, got {agent_id}")
    if agent_id == 1:
        return None
    return 1 if agent_id <= 3 else agent_id - 2


@dataclass(frozen=True, slots=True)
class AgentState:
    id: int
    pose: Pose
    speed: float
    permanent_leader_id: Optional[int] = None
    temp_leader_id: Optional[int] = None
    mode: Mode = Mode.FORMATION
    leg: Leg = Leg.LEADER
    # formation slot currently owned; starts at id - 1, reassigned by turn-back
    slot: int = 0

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ValueError(f"agent id must be >= 1, got {self.id}")
        if not (self.speed > 0.0 and math.isfinite(self.speed)):
            raise ValueError(f"agent {self.id}: speed must be positive, got {self.speed}")
        if self.leg != leg_of(self.id):
            raise ValueError(f"agent {self.id}: leg {self.leg} inconsistent with id")
        if self.temp_leader_id is not None:
            if self.temp_leader_id == self.id:
                raise ValueError(f"agent {self.id} cannot lead itself")
            if self.mode == Mode.FORMATION:
                raise ValueError(f"agent {self.id}: temporary leader set in Formation mode")

    @classmethod
    def create(cls, agent_id: int, pose: Pose, speed: float) -> "AgentState":
        return cls(
            id=agent_id,
            pose=pose,
            speed=speed,
            permanent_leader_id=permanent_leader_of(agent_id),
            leg=leg_of(agent_id),
            slot=agent_id - 1,
        )

    @property
    def position(self) -> Vec2:
        return self.pose.position

    @property
    def heading(self) -> float:
        return self.pose.heading

    @property
    def effective_leader_id(self) -> Optional[int]:
        return self.temp_leader_id if self.temp_leader_id is not None else self.permanent_leader_id


@dataclass(frozen=True, slots=True)
class Obstacle:
    """Convex polygon with counterclockwise vertices."""

    id: int
    vertices: tuple[Vec2, ...]

    def __post_init__(self) -> None:
        verts = tuple(v if isinstance(v, Vec2) else Vec2(*v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        check_convex_ccw(verts)

    def edges(self):
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    def contains(self, p: Vec2) -> bool:
        return all((b - a).cross(p - a) > 0.0 for a, b in self.edges())


def check_convex_ccw(vertices: Sequence[Vec2]) -> None:
    """Raise ValueError unless ``vertices`` form a strictly convex CCW polygon."""
    n = len(vertices)
    if n < 3:
        raise ValueError(f"polygon needs >= 3 vertices, got {n}")
    if len(set((v.x, v.y) for v in vertices)) != n:
        raise ValueError("polygon has repeated vertices")
    for i in range(n):
        a, b, c = vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]
        if (b - a).cross(c - b) <= 0.0:
            raise ValueError(f"polygon is not strictly convex counterclockwise at vertex {(i + 1) % n}")
    # a star polygon passes the local turn test but winds more than once
    total = sum(
        wrap_angle(math.atan2((vertices[(i + 2) % n] - vertices[(i + 1) % n]).y,
                              (vertices[(i + 2) % n] - vertices[(i + 1) % n]).x)
                   - math.atan2((vertices[(i + 1) % n] - vertices[i]).y,
                                (vertices[(i + 1) % n] - vertices[i]).x))
        for i in range(n)
    )
    if abs(total - 2.0 * math.pi) > 1e-6:
        raise ValueError("polygon winds more than once")


def closest_point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2:
    ab = b - a
    denom = ab.dot(ab)
    if denom == 0.0:
        return a
    t = min(1.0, max(0.0, (p - a).dot(ab) / denom))
    return Vec2(a.x + t * ab.x, a.y + t * ab.y)


def closest_point_on_polygon(p: Vec2, obstacle: Obstacle) -> Vec2:
    """Closest point of the polygon region (boundary or ``p`` itself if inside)."""
    if obstacle.contains(p):
        return p
    best, best_d = None, math.inf
    for a, b in obstacle.edges():
        q = closest_point_on_segment(p, a, b)
        d = q.dist(p)
        if d < best_d:
            best, best_d = q, d
    return best


def distance_to_polygon(p: Vec2, obstacle: Obstacle) -> float:
    """Distance from ``p`` to the polygon region; 0 inside."""
    return closest_point_on_polygon(p, obstacle).dist(p)


@dataclass(frozen=True)
class WorldState:
    tick: int
    dt: float
    agents: tuple[AgentState, ...]
    obstacles: tuple[Obstacle, ...] = ()
    destination: Vec2 = field(default_factory=lambda: Vec2(0.0, 0.0))

    def __post_init__(self) -> None:
        agents = tuple(sorted(self.agents, key=lambda a: a.id))
        object.__setattr__(self, "agents", agents)
        ids = [a.id for a in agents]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"agent ids must be consecutive from 1, got {ids}")
        if self.tick < 0:
            raise ValueError("tick must be non-negative")

    @property
    def time(self) -> float:
        return self.tick * self.dt

    def agent(self, agent_id: int) -> AgentState:
        return self.agents[agent_id - 1]

    @property
    def leader(self) -> AgentState:
        return self.agents[0]


def step_toward(agent: AgentState, waypoint: Vec2, dt: float) -> AgentState:
    """Advance exactly ``speed * dt`` toward ``waypoint``.

    A waypoint closer than one step is overshot; a waypoint on the agent keeps
    the previous heading.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    d = waypoint - agent.position
    heading = agent.heading if (d.x == 0.0 and d.y == 0.0) else math.atan2(d.y, d.x)
    return advance(agent, heading, dt)


def advance(agent: AgentState, heading: float, dt: float) -> AgentState:
    step = agent.speed * dt
    p = agent.position
    new_pos = Vec2(p.x + step * math.cos(heading), p.y + step * math.sin(heading))
    return replace(agent, pose=Pose(new_pos, heading))
