"""V-formation geometry: target slots (TShape) and current shape (CShape)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AgentState, Pose, Vec2, WorldState, heading_vector


@dataclass(frozen=True)
class FormationSpec:
    n_agents: int
    spacing: float = 10.0
    half_angle: float = math.pi / 4

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {self.n_agents}")
        if not self.spacing > 0.0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if not 0.0 < self.half_angle < math.pi / 2:
            raise ValueError(f"half_angle must lie in (0, pi/2), got {self.half_angle}")


def slot_offset(agent_id: int, spec: FormationSpec) -> tuple[float, float]:
    """Slot of ``agent_id`` in the leader frame as (along-heading, left-of-heading)."""
    if agent_id == 1:
        return 0.0, 0.0
    depth = agent_id // 2
    back = -depth * spec.spacing * math.cos(spec.half_angle)
    side = depth * spec.spacing * math.sin(spec.half_angle)
    return back, side if agent_id % 2 == 0 else -side


def slot_positions(leader_pose: Pose, spec: FormationSpec) -> np.ndarray:
    """World-frame slots, row k holding the slot of agent id k + 1."""
    c, s = math.cos(leader_pose.heading), math.sin(leader_pose.heading)
    px, py = leader_pose.position.x, leader_pose.position.y
    out = np.empty((spec.n_agents, 2))
    for k in range(spec.n_agents):
        a, b = slot_offset(k + 1, spec)
        out[k, 0] = px + a * c - b * s
        out[k, 1] = py + a * s + b * c
    return out


def current_shape(world: WorldState) -> np.ndarray:
    return np.array([[a.position.x, a.position.y] for a in world.agents], dtype=float)


def slot_point(slot: int, leader_pose: Pose, spec: FormationSpec) -> Vec2:
    a, b = slot_offset(slot + 1, spec)
    h = heading_vector(leader_pose.heading)
    return leader_pose.position + h * a + h.left_normal() * b


def formation_waypoint(agent: AgentState, leader_state: AgentState, spec: FormationSpec) -> Vec2:
    """Formation slot owned by ``agent``, anchored at the swarm leader's pose."""
    if agent.id == 1:
        raise ValueError("the swarm leader has no formation waypoint")
    return slot_point(agent.slot, leader_state.pose, spec)
