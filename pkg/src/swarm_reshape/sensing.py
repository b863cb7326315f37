"""Obstacle detection and gap measurement between detected obstacles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    AgentState,
    Obstacle,
    Vec2,
    WorldState,
    bearing_from,
    closest_point_on_polygon,
    closest_point_on_segment,
)

# candidate closest pairs within this distance of the minimum are treated as ties
_TIE_EPS = 1e-9


@dataclass(frozen=True)
class Detection:
    obstacle_id: int
    distance: float
    bearing: float
    closest_point: Vec2


@dataclass(frozen=True)
class GapInfo:
    width: float
    midpoint: Vec2
    bearing: float
    obstacle_ids: tuple[int, int]
    # ends of the realizing closest-point segment, on the first and second obstacle
    endpoints: tuple[Vec2, Vec2]
    # unit normal of the gap line pointing away from the agent that measured the gap
    normal: Vec2

    def __post_init__(self) -> None:
        if self.width < 0.0:
            raise ValueError("gap width must be non-negative")
        if self.obstacle_ids[0] == self.obstacle_ids[1]:
            raise ValueError("gap needs two distinct obstacles")

    def signed_progress(self, p: Vec2) -> float:
        """Signed distance of ``p`` past the gap line (negative before it)."""
        return (p - self.midpoint).dot(self.normal)

    def has_passed(self, p: Vec2) -> bool:
        return self.signed_progress(p) >= 0.0


def detect_obstacles(agent: AgentState, world: WorldState, detection_range: float,
                     ignore: frozenset[int] = frozenset()) -> tuple[bool, list[Detection]]:
    if not detection_range > 0.0:
        raise ValueError("detection_range must be positive")
    p = agent.position
    found = []
    for obs in world.obstacles:
        if obs.id in ignore:
            continue
        q = closest_point_on_polygon(p, obs)
        d = q.dist(p)
        if d <= detection_range:
            bearing = bearing_from(agent.pose, q) if d > 0.0 else 0.0
            found.append(Detection(obs.id, d, bearing, q))
    found.sort(key=lambda det: (det.distance, det.obstacle_id))
    return bool(found), found


def polygon_distance(a: Obstacle, b: Obstacle) -> tuple[float, Vec2, Vec2]:
    """Minimum boundary distance between two convex polygons and a realizing pair.

    When a whole family of closest pairs exists (parallel facing edges) the
    returned pair is the centre of that family.
    """
    if _polygons_overlap(a, b):
        p = _overlap_witness(a, b)
        return 0.0, p, p
    cands = []
    for v in a.vertices:
        for e0, e1 in b.edges():
            q = closest_point_on_segment(v, e0, e1)
            cands.append((v.dist(q), v, q))
    for v in b.vertices:
        for e0, e1 in a.edges():
            q = closest_point_on_segment(v, e0, e1)
            cands.append((v.dist(q), q, v))
    best = min(c[0] for c in cands)
    ties = [c for c in cands if c[0] <= best + _TIE_EPS * max(1.0, best)]
    k = len(ties)
    pa = Vec2(sum(t[1].x for t in ties) / k, sum(t[1].y for t in ties) / k)
    pb = Vec2(sum(t[2].x for t in ties) / k, sum(t[2].y for t in ties) / k)
    return best, pa, pb


def _polygons_overlap(a: Obstacle, b: Obstacle) -> bool:
    # separating axis test over both polygons' edge normals
    for poly in (a, b):
        for e0, e1 in poly.edges():
            n = (e1 - e0).left_normal()
            pa = [n.dot(v) for v in a.vertices]
            pb = [n.dot(v) for v in b.vertices]
            if max(pa) < min(pb) or max(pb) < min(pa):
                return False
    return True


def _overlap_witness(a: Obstacle, b: Obstacle) -> Vec2:
    for v in a.vertices:
        if b.contains(v):
            return v
    for v in b.vertices:
        if a.contains(v):
            return v
    # edges cross without contained vertices; closest vertex-edge pair touches
    best = None
    for v in a.vertices:
        for e0, e1 in b.edges():
            q = closest_point_on_segment(v, e0, e1)
            if best is None or v.dist(q) < best[0]:
                best = (v.dist(q), q)
    return best[1]


def compute_gap(detections: Sequence[Detection], world: WorldState,
                observer: Optional[AgentState] = None) -> Optional[GapInfo]:
    """Narrowest opening among the detected obstacles, seen from ``observer``.

    ``observer`` defaults to the swarm leader.
    """
    if len(detections) < 2:
        return None
    observer = observer or world.leader
    by_id = {o.id: o for o in world.obstacles}
    ids = sorted({d.obstacle_id for d in detections})
    best = None
    for i, j in itertools.combinations(ids, 2):
        width, pa, pb = polygon_distance(by_id[i], by_id[j])
        if best is None or width < best[0] - _TIE_EPS:
            best = (width, pa, pb, (i, j))
    width, pa, pb, pair = best
    mid = Vec2(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y))
    seg = pb - pa
    to_mid = mid - observer.position
    if seg.norm() > 0.0:
        normal = seg.left_normal().unit()
    elif to_mid.norm() > 0.0:
        normal = to_mid.unit()
    else:
        normal = Vec2(math.cos(observer.heading), math.sin(observer.heading))
    if normal.dot(to_mid) < 0.0:
        normal = -normal
    bearing = bearing_from(observer.pose, mid) if to_mid.norm() > 0.0 else 0.0
    return GapInfo(width, mid, bearing, pair, (pa, pb), normal)
