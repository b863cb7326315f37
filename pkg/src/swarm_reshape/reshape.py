"""Gap case analysis, leg merging and queue following.

Case table for a leader detection:

    obstacles  gap >= safe_dist   case
    1          -                  SingleObstacle
    >1         no                 TreatAsSingle
    >1         yes                PassThrough

Under PassThrough the legs merge into one queue. A gap on the leader's right
(negative bearing) or dead ahead merges the left leg into the right one, which
gives the queue order 1, 2, 3, 4, ...; a gap on the left merges the right leg
into the left one, giving 1, 3, 2, 5, 4, ...
"""
from __future__ import annotations

import enum
import math
from typing import Optional

from .core import AgentState, Obstacle, Vec2, bearing_from, distance_to_polygon, heading_vector
from .sensing import Detection, GapInfo


class AvoidanceCase(str, enum.Enum):
    SINGLE_OBSTACLE = "SingleObstacle"
    TREAT_AS_SINGLE = "TreatAsSingle"
    PASS_THROUGH = "PassThrough"


class MergeDirection(str, enum.Enum):
    LEFT_INTO_RIGHT = "LeftIntoRight"
    RIGHT_INTO_LEFT = "RightIntoLeft"


def classify(obs_num: int, gap: Optional[GapInfo], safe_dist: float) -> AvoidanceCase:
    if obs_num < 1:
        raise ValueError(f"obs_num must be >= 1, got {obs_num}")
    if obs_num == 1:
        return AvoidanceCase.SINGLE_OBSTACLE
    if gap is None:
        raise ValueError("a gap is required when more than one obstacle is detected")
    if gap.width >= safe_dist:
        return AvoidanceCase.PASS_THROUGH
    return AvoidanceCase.TREAT_AS_SINGLE


def merge_direction(obs_ang: float) -> MergeDirection:
    if not math.isfinite(obs_ang):
        raise ValueError(f"non-finite angle {obs_ang}")
    if obs_ang > 0.0:
        return MergeDirection.RIGHT_INTO_LEFT
    # negative, and zero by fixed priority
    return MergeDirection.LEFT_INTO_RIGHT


def temp_leader_for(agent_id: int, direction: MergeDirection, n_agents: Optional[int] = None) -> int:
    """Temporary leader of ``agent_id`` once the legs merge.

    ``n_agents`` is needed only to detect the deepest even agent under
    RightIntoLeft, whose ``id + 1`` partner does not exist. That agent follows
    ``id - 2``, the tail of the queue; ``id - 1`` already leads ``id - 2``.
    """
    if agent_id < 2:
        raise ValueError("the swarm leader never takes a temporary leader")
    if direction is MergeDirection.LEFT_INTO_RIGHT:
        return agent_id - 1
    if agent_id % 2 == 0:
        if n_agents is not None and agent_id + 1 > n_agents:
            return max(1, agent_id - 2)
        return agent_id + 1
    return max(1, agent_id - 3)


def temp_leader_table(n_agents: int, direction: MergeDirection) -> dict[int, int]:
    return {k: temp_leader_for(k, direction, n_agents) for k in range(2, n_agents + 1)}


def queue_order(n_agents: int, direction: MergeDirection) -> list[int]:
    """Walk the temporary-leader graph from the leader; raises if it is not a single path."""
    table = temp_leader_table(n_agents, direction)
    children: dict[int, list[int]] = {}
    for child, parent in table.items():
        children.setdefault(parent, []).append(child)
    order, node = [1], 1
    while node in children:
        kids = children[node]
        if len(kids) != 1:
            raise ValueError(f"agent {node} leads {len(kids)} agents under {direction.value}")
        node = kids[0]
        if node in order:
            raise ValueError("temporary-leader graph has a cycle")
        order.append(node)
    if len(order) != n_agents:
        raise ValueError(f"queue reaches {len(order)} of {n_agents} agents")
    return order


def queue_waypoint(agent: AgentState, temp_leader: AgentState, queue_gap: float,
                   direction: Optional[float] = None) -> Vec2:
    """Point ``queue_gap`` behind the temporary leader.

    ``direction`` overrides the temporary leader's heading as the queue axis.
    """
    if not queue_gap > 0.0:
        raise ValueError("queue_gap must be positive")
    axis = temp_leader.heading if direction is None else direction
    return temp_leader.position - heading_vector(axis) * queue_gap


def leader_passage_waypoint(leader: AgentState, gap: GapInfo, destination: Vec2) -> Vec2:
    """Gap midpoint until the leader is on or past the gap line, destination afterwards."""
    if gap.has_passed(leader.position):
        return destination
    return gap.midpoint


def avoid_side(agent: AgentState, obstacle: Obstacle) -> int:
    """+1 to go round ``obstacle`` on the left, -1 on the right.

    Picks the side whose silhouette lies closer to the agent's course line,
    i.e. the smaller sideways shift; ties go right.
    """
    left = heading_vector(agent.heading).left_normal()
    lats = [(v - agent.position).dot(left) for v in obstacle.vertices]
    return 1 if max(lats) < -min(lats) - 1e-12 else -1


def avoid_single(agent: AgentState, nearest: Detection, clearance: float,
                 side: Optional[int] = None) -> Vec2:
    """Sidestep point beside the nearest obstacle point.

    The obstacle point is shifted by ``clearance`` perpendicular to the agent
    heading, toward whichever side needs the smaller turn; ties go right.
    A caller that has already committed to a side passes it as ``side``.
    """
    if not clearance > 0.0:
        raise ValueError("clearance must be positive")
    left = heading_vector(agent.heading).left_normal()
    p = nearest.closest_point
    if side is None:
        turn_left = abs(_bearing_or_zero(agent, p + left * clearance))
        turn_right = abs(_bearing_or_zero(agent, p - left * clearance))
        side = 1 if turn_left < turn_right - 1e-12 else -1
    elif side not in (1, -1):
        raise ValueError(f"side must be +1 or -1, got {side}")
    return p + left * (side * clearance)


def _bearing_or_zero(agent: AgentState, target: Vec2) -> float:
    if target == agent.position:
        return 0.0
    return bearing_from(agent.pose, target)


def passage_complete(agent: AgentState, gap: GapInfo, obstacles: tuple[Obstacle, Obstacle],
                     clearance: float) -> bool:
    """Strictly past the gap line and farther than ``clearance`` from both gap obstacles."""
    if gap.signed_progress(agent.position) <= 0.0:
        return False
    return all(distance_to_polygon(agent.position, o) > clearance for o in obstacles)
