"""Mission loop: sensing, reshaping, queue transit, turn-back and kinematic stepping.

Every tick reads only the previous state. Observation events (an obstacle
seen, every follower settled in the queue, the swarm clear of the gap, shapes
matching, arrival) carry the time of the state they were observed in; events
that mark a decision (ReshapeStart, TurnBackStart) carry the time of the first
state that holds the new modes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from .config import ScenarioConfig, SimMode
from .core import (
    AgentState,
    Mode,
    Obstacle,
    Pose,
    Vec2,
    WorldState,
    advance,
    distance_to_polygon,
    heading_vector,
    wrap_angle,
)
from .formation import current_shape, slot_point, slot_positions
from .reshape import (
    AvoidanceCase,
    MergeDirection,
    avoid_side,
    avoid_single,
    classify,
    leader_passage_waypoint,
    merge_direction,
    passage_complete,
    queue_order,
    queue_waypoint,
    temp_leader_table,
)
from .registration import Assignment, anneal_assignment, shapes_match
from .sensing import Detection, GapInfo, compute_gap, detect_obstacles

QUEUE_JOIN_TOL = 0.5
_FILTER_STEP = math.radians(5.0)


class EventKind(str, enum.Enum):
    OBSTACLE_DETECTED = "ObstacleDetected"
    RESHAPE_START = "ReshapeStart"
    QUEUE_FORMED = "QueueFormed"
    PASSAGE_COMPLETE = "PassageComplete"
    TURN_BACK_START = "TurnBackStart"
    FORMATION_RESTORED = "FormationRestored"
    DESTINATION_REACHED = "DestinationReached"


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    agent_id: int


@dataclass(frozen=True)
class Episode:
    """A gap passage in progress."""

    gap: GapInfo
    direction: MergeDirection
    obstacles: tuple[Obstacle, Obstacle]
    order: tuple[int, ...]
    passed: frozenset[int] = frozenset()
    assignment: Optional[Assignment] = None


@dataclass(frozen=True)
class SimState:
    world: WorldState
    episode: Optional[Episode] = None
    psr: bool = False
    handled: frozenset[int] = frozenset()
    emitted: frozenset[EventKind] = frozenset()
    arrived: bool = False
    done: bool = False
    # baseline bookkeeping
    disturbed: bool = False
    watch_gap: Optional[GapInfo] = None
    watch_obstacles: tuple[Obstacle, ...] = ()
    passage_seen: bool = False
    # agent id -> (obstacle id, side) for agents currently sidestepping
    sides: tuple[tuple[int, tuple[int, int]], ...] = ()


@dataclass
class SimulationResult:
    config: ScenarioConfig
    worlds: list[WorldState]
    events: list[Event]
    complete: bool
    assignment: Optional[Assignment] = None

    @property
    def trajectory(self) -> list[tuple[Pose, ...]]:
        return [tuple(a.pose for a in w.agents) for w in self.worlds]

    def event_times(self, kind: EventKind) -> list[float]:
        return [e.time for e in self.events if e.kind == kind]

    def first_time(self, kind: EventKind) -> Optional[float]:
        times = self.event_times(kind)
        return times[0] if times else None


def initial_state(config: ScenarioConfig) -> SimState:
    """Agents on their V slots around the configured leader pose."""
    spec = config.formation
    lp = config.start_leader_pose
    slots = slot_positions(lp, spec)
    agents = []
    for k in range(config.n_agents):
        speed = config.agent_speed if k == 0 else config.follower_speed()
        pose = Pose(Vec2(float(slots[k, 0]), float(slots[k, 1])), lp.heading)
        agents.append(AgentState.create(k + 1, pose, speed))
    world = WorldState(0, config.dt, tuple(agents), config.build_obstacles(), config.destination)
    return SimState(world)


# ---------------------------------------------------------------------------
# steering helpers


def tracking_heading(agent: AgentState, target_next: Vec2, target_motion: Vec2, dt: float) -> float:
    """Heading that brings the agent as close as possible to where its target will be.

    ``target_next`` is the target's position after this tick and
    ``target_motion`` its displacement over the tick. Out of reach, the agent
    flies straight at it. Within reach the agent must still cover a full step,
    so it matches the target's along-track motion and spends the surplus
    sideways, toward the lateral error.
    """
    p = agent.position
    step = agent.speed * dt
    d = target_next - p
    dist = d.norm()
    if dist >= step:
        return math.atan2(d.y, d.x)
    if target_motion.norm() > 1e-12:
        axis = target_motion.unit()
    else:
        axis = heading_vector(agent.heading)
    normal = axis.left_normal()
    along = d.dot(axis)
    if abs(along) > step:
        return math.atan2(d.y, d.x)
    lat = d.dot(normal)
    side = 1.0 if lat >= 0.0 else -1.0
    v = axis * along + normal * (side * math.sqrt(max(0.0, step * step - along * along)))
    return math.atan2(v.y, v.x)


def course_heading(agent: AgentState, target_next: Vec2, target_motion: Vec2, lookahead: float) -> float:
    """Smoothed direction of travel: toward a point ``lookahead`` down the target's track.

    Unlike the tracking heading it does not zigzag once the agent sits on its
    target, so it is what obstacle threats are judged against.
    """
    aim = target_next
    if target_motion.norm() > 1e-12:
        aim = target_next + target_motion.unit() * lookahead
    return heading_to(agent.position, aim, agent.heading)


def heading_to(p: Vec2, target: Vec2, fallback: float) -> float:
    d = target - p
    if d.x == 0.0 and d.y == 0.0:
        return fallback
    return math.atan2(d.y, d.x)


def safe_heading(agent: AgentState, desired: float, dt: float, obstacles: Iterable[Obstacle],
                 others: Iterable[AgentState], margin: float, separation: float) -> float:
    """Smallest rotation of ``desired`` whose step keeps clear of obstacles and agents.

    A step may not end within ``margin`` of an obstacle. It may not end within
    ``separation`` plus one step of another agent's current position either,
    which keeps the pair ``separation`` apart wherever that agent moves. An
    agent already inside a limit may move as long as it does not get closer.
    When no rotation qualifies, the least-violating one is taken.
    """
    p = agent.position
    step = agent.speed * dt
    near = []
    for obs in obstacles:
        d0 = distance_to_polygon(p, obs)
        if d0 <= step + margin + 1e-9:
            near.append((obs, d0))
    close = []
    for other in others:
        q = other.position
        need = separation + other.speed * dt
        d0 = p.dist(q)
        if d0 <= step + need + 1e-9:
            close.append((q, min(need, d0)))
    if not near and not close:
        return desired
    best, best_slack = desired, -math.inf
    for k in range(0, 37):
        for sign in ((1.0,) if k in (0, 36) else (1.0, -1.0)):
            th = desired + sign * k * _FILTER_STEP
            x = Vec2(p.x + step * math.cos(th), p.y + step * math.sin(th))
            slack = math.inf
            for obs, d0 in near:
                d = distance_to_polygon(x, obs)
                slack = min(slack, d - min(margin, d0) if d > 0.0 else -math.inf)
            for q, need in close:
                slack = min(slack, x.dist(q) - need)
            if slack >= 0.0:
                return wrap_angle(th)
            if slack > best_slack:
                best, best_slack = th, slack
    return wrap_angle(best)


def threatening(agent: AgentState, direction: float, detections: list[Detection],
                obstacles: dict[int, Obstacle], clearance: float, reach: float) -> Optional[Detection]:
    """Nearest detection ahead whose obstacle the straight course would pass within ``clearance`` of."""
    p = agent.position
    u = heading_vector(direction)
    samples = max(2, int(reach / max(clearance, 1e-6) * 2) + 1)
    for det in detections:
        if (det.closest_point - p).dot(u) <= 0.0:
            continue
        obs = obstacles[det.obstacle_id]
        for i in range(samples):
            x = p + u * (reach * i / (samples - 1))
            if distance_to_polygon(x, obs) < clearance:
                return det
    return None


# ---------------------------------------------------------------------------
# tick


def _emit(events: list[Event], emitted: set, time: float, kind: EventKind, agent_id: int) -> None:
    if kind not in emitted:
        emitted.add(kind)
        events.append(Event(time, kind, agent_id))


def tick(state: SimState, config: ScenarioConfig) -> tuple[SimState, list[Event]]:
    """Advance one step; returns the new state and the events raised."""
    if config.mode == SimMode.DFRPSR:
        return _tick_dfrpsr(state, config)
    return _tick_baseline(state, config)


def _predicted(agent: AgentState, dt: float) -> Vec2:
    return agent.position + heading_vector(agent.heading) * (agent.speed * dt)


def _others(world: WorldState, me: int) -> list[AgentState]:
    return [a for a in world.agents if a.id != me]


def _slot_target(agent: AgentState, leader: AgentState, config: ScenarioConfig) -> tuple[Vec2, Vec2]:
    """Slot position now and after the leader's next step at its current heading."""
    spec = config.formation
    now = slot_point(agent.slot, leader.pose, spec)
    nxt = slot_point(agent.slot, Pose(_predicted(leader, config.dt), leader.heading), spec)
    return nxt, nxt - now


def _queue_target(agent: AgentState, world: WorldState, config: ScenarioConfig) -> tuple[Vec2, Vec2]:
    # queue axis follows the swarm leader; followers' own headings zigzag
    leader = world.leader
    axis = heading_vector(leader.heading)
    now = world.agent(agent.temp_leader_id).position - axis * config.queue_gap
    motion = axis * (leader.speed * config.dt)
    return now + motion, motion


def _local_avoid(agent: AgentState, course_h: float, detections: list[Detection],
                 by_id: dict[int, Obstacle], config: ScenarioConfig,
                 sides: dict[int, tuple[int, int]], new_sides: dict[int, tuple[int, int]]) -> Optional[float]:
    """Heading toward the sidestep point if the course is threatened, else None.

    The first side chosen for an obstacle is kept until the threat clears, so
    a near-symmetric approach does not flip sides from tick to tick.
    """
    hit = threatening(agent, course_h, detections, by_id, config.clearance, config.detection_range)
    if hit is None:
        return None
    course = replace(agent, pose=Pose(agent.position, course_h))
    latched = sides.get(agent.id)
    if latched is not None and latched[0] == hit.obstacle_id:
        side = latched[1]
    else:
        side = avoid_side(course, by_id[hit.obstacle_id])
    new_sides[agent.id] = (hit.obstacle_id, side)
    wp = avoid_single(course, hit, config.clearance, side)
    return heading_to(agent.position, wp, course_h)


def _step(agent: AgentState, heading: float, world: WorldState, config: ScenarioConfig,
          with_agents: bool = True) -> AgentState:
    others = _others(world, agent.id) if with_agents else ()
    h = safe_heading(agent, heading, world.dt, world.obstacles, others,
                     config.obstacle_margin, config.agent_separation)
    return advance(agent, h, world.dt)


def _check_arrival(state: SimState, config: ScenarioConfig, events: list, emitted: set) -> bool:
    if state.arrived:
        return True
    if state.world.leader.position.dist(config.destination) <= config.arrival_radius:
        _emit(events, emitted, state.world.time, EventKind.DESTINATION_REACHED, 1)
        return True
    return False


def _commit(state: SimState, planned: dict[int, AgentState], modes: dict[int, dict],
            **changes) -> SimState:
    world = state.world
    agents = []
    for a in world.agents:
        new = planned[a.id]
        if a.id in modes:
            new = replace(new, **modes[a.id])
        agents.append(new)
    new_world = replace(world, tick=world.tick + 1, agents=tuple(agents))
    return replace(state, world=new_world, **changes)


def _tick_dfrpsr(state: SimState, config: ScenarioConfig) -> tuple[SimState, list[Event]]:
    world = state.world
    t = world.time
    events: list[Event] = []
    emitted = set(state.emitted)
    leader = world.leader
    by_id = {o.id: o for o in world.obstacles}
    n = len(world.agents)
    sides = dict(state.sides)
    new_sides: dict[int, tuple[int, int]] = {}

    arrived = _check_arrival(state, config, events, emitted)
    episode = state.episode
    psr = state.psr
    handled = state.handled
    modes: dict[int, dict] = {}
    next_events: list[tuple[EventKind, int]] = []

    if arrived and episode is None and not psr:
        return replace(state, arrived=True, done=True, emitted=frozenset(emitted)), events

    # leader sensing and the reshape decision
    flag, dets = detect_obstacles(leader, world, config.detection_range, ignore=handled)
    if flag:
        _emit(events, emitted, t, EventKind.OBSTACLE_DETECTED, 1)
    leader_h = leader.heading if arrived else heading_to(leader.position, config.destination, leader.heading)
    if episode is None and flag:
        gap = compute_gap(dets, world) if len(dets) > 1 else None
        if classify(len(dets), gap, config.safe_dist) is AvoidanceCase.PASS_THROUGH:
            direction = merge_direction(gap.bearing)
            episode = Episode(
                gap=gap,
                direction=direction,
                obstacles=(by_id[gap.obstacle_ids[0]], by_id[gap.obstacle_ids[1]]),
                order=tuple(queue_order(n, direction)),
            )
            handled = handled | {d.obstacle_id for d in dets}
            modes[1] = {"mode": Mode.QUEUE_TRANSITION}
            for k, lead in temp_leader_table(n, direction).items():
                modes[k] = {"mode": Mode.QUEUE_TRANSITION, "temp_leader_id": lead}
            next_events.append((EventKind.RESHAPE_START, 1))
            leader_h = heading_to(leader.position, leader_passage_waypoint(leader, gap, config.destination),
                                  leader_h)
        else:
            avoid_h = _local_avoid(leader, leader_h, dets, by_id, config, sides, new_sides)
            if avoid_h is not None:
                leader_h = avoid_h
    elif episode is not None and not psr:
        leader_h = heading_to(leader.position, leader_passage_waypoint(leader, episode.gap, config.destination),
                              leader_h)

    # mode bookkeeping on the current state
    if episode is not None and not psr and leader.mode != Mode.FORMATION:
        joined_now = []
        for a in world.agents[1:]:
            if a.mode == Mode.QUEUE_TRANSITION:
                wp = queue_waypoint(a, world.agent(a.temp_leader_id), config.queue_gap, leader.heading)
                if a.position.dist(wp) <= QUEUE_JOIN_TOL:
                    modes[a.id] = {"mode": Mode.QUEUE}
                    joined_now.append(a.id)
        all_queued = all(a.mode == Mode.QUEUE or a.id in joined_now for a in world.agents[1:])
        if all_queued and leader.mode == Mode.QUEUE_TRANSITION:
            modes[1] = {"mode": Mode.QUEUE}
            _emit(events, emitted, t, EventKind.QUEUE_FORMED, max(joined_now, default=1))
        passed = set(episode.passed)
        newly = [a.id for a in world.agents
                 if a.id not in passed and passage_complete(a, episode.gap, episode.obstacles, config.clearance)]
        passed.update(newly)
        episode = replace(episode, passed=frozenset(passed))
        if len(passed) == n and leader.mode == Mode.QUEUE:
            _emit(events, emitted, t, EventKind.PASSAGE_COMPLETE, max(newly, default=1))
            assignment = _turn_back_assignment(world, config)
            episode = replace(episode, assignment=assignment)
            psr = True
            for a in world.agents:
                modes[a.id] = {"mode": Mode.TURN_BACK, "temp_leader_id": None,
                               "slot": assignment.slot_of[a.id - 1]}
            next_events.append((EventKind.TURN_BACK_START, 1))
    elif psr and leader.mode == Mode.TURN_BACK:
        tshape = slot_positions(leader.pose, config.formation)
        if shapes_match(current_shape(world), tshape, episode.assignment, config.turnback_tol):
            _emit(events, emitted, t, EventKind.FORMATION_RESTORED, 1)
            psr = False
            episode = None
            for a in world.agents:
                modes[a.id] = {"mode": Mode.FORMATION}

    planned = {1: _step(leader, leader_h, world, config, with_agents=False)}
    for a in world.agents[1:]:
        if a.mode in (Mode.QUEUE, Mode.QUEUE_TRANSITION):
            target, motion = _queue_target(a, world, config)
            h = tracking_heading(a, target, motion, world.dt)
        else:
            target, motion = _slot_target(a, leader, config)
            h = tracking_heading(a, target, motion, world.dt)
            if a.mode == Mode.FORMATION and state.episode is None:
                _, own = detect_obstacles(a, world, config.detection_range)
                avoid_h = _local_avoid(a, course_heading(a, target, motion, config.detection_range), own, by_id, config,
                                       sides, new_sides)
                if avoid_h is not None:
                    h = avoid_h
        planned[a.id] = _step(a, h, world, config)

    new_state = _commit(state, planned, modes, episode=episode, psr=psr, handled=handled,
                        arrived=arrived, sides=tuple(sorted(new_sides.items())))
    for kind, agent_id in next_events:
        _emit(events, emitted, new_state.world.time, kind, agent_id)
    return replace(new_state, emitted=frozenset(emitted)), events


def _turn_back_assignment(world: WorldState, config: ScenarioConfig) -> Assignment:
    """Followers matched to the non-apex slots; the leader keeps the apex."""
    n = len(world.agents)
    if n == 1:
        return Assignment.identity(1)
    cshape = current_shape(world)
    tshape = slot_positions(world.leader.pose, config.formation)
    sub = anneal_assignment(cshape[1:], tshape[1:], config.anneal)
    slot_of = (0,) + tuple(1 + s for s in sub.slot_of)
    d = cshape - tshape[list(slot_of)]
    return Assignment(slot_of, float(np.sum(d * d)))


def _tick_baseline(state: SimState, config: ScenarioConfig) -> tuple[SimState, list[Event]]:
    world = state.world
    t = world.time
    events: list[Event] = []
    emitted = set(state.emitted)
    leader = world.leader
    by_id = {o.id: o for o in world.obstacles}
    sides = dict(state.sides)
    new_sides: dict[int, tuple[int, int]] = {}

    arrived = _check_arrival(state, config, events, emitted)
    disturbed = state.disturbed
    watch_gap, watch_obs = state.watch_gap, state.watch_obstacles
    passage_seen = state.passage_seen

    sensed = {a.id: detect_obstacles(a, world, config.detection_range)[1] for a in world.agents}
    detectors = [k for k, d in sensed.items() if d]
    if detectors:
        _emit(events, emitted, t, EventKind.OBSTACLE_DETECTED, min(detectors))
    if watch_gap is None and len(sensed[1]) > 1:
        watch_gap = compute_gap(sensed[1], world)
        watch_obs = (by_id[watch_gap.obstacle_ids[0]], by_id[watch_gap.obstacle_ids[1]])
    if watch_gap is not None and not passage_seen:
        if all(passage_complete(a, watch_gap, watch_obs, config.clearance) for a in world.agents):
            passage_seen = True
            _emit(events, emitted, t, EventKind.PASSAGE_COMPLETE, 1)
    if disturbed and not state.sides and (passage_seen or watch_gap is None):
        ident = Assignment(tuple(a.slot for a in world.agents), 0.0)
        tshape = slot_positions(leader.pose, config.formation)
        if shapes_match(current_shape(world), tshape, ident, config.turnback_tol):
            _emit(events, emitted, t, EventKind.FORMATION_RESTORED, 1)
            disturbed = False

    if arrived and not disturbed:
        return replace(state, arrived=True, done=True, emitted=frozenset(emitted), disturbed=disturbed,
                       watch_gap=watch_gap, watch_obstacles=watch_obs, passage_seen=passage_seen), events

    leader_h = leader.heading if arrived else heading_to(leader.position, config.destination, leader.heading)
    avoid_h = _local_avoid(leader, leader_h, sensed[1], by_id, config, sides, new_sides)
    planned = {1: _step(leader, leader_h if avoid_h is None else avoid_h, world, config, with_agents=False)}
    for a in world.agents[1:]:
        target, motion = _slot_target(a, leader, config)
        h = tracking_heading(a, target, motion, world.dt)
        avoid_h = _local_avoid(a, course_heading(a, target, motion, config.detection_range), sensed[a.id], by_id, config,
                               sides, new_sides)
        planned[a.id] = _step(a, h if avoid_h is None else avoid_h, world, config)

    if new_sides:
        disturbed = True
    new_state = _commit(state, planned, {}, arrived=arrived, disturbed=disturbed, watch_gap=watch_gap,
                        watch_obstacles=watch_obs, passage_seen=passage_seen,
                        sides=tuple(sorted(new_sides.items())))
    return replace(new_state, emitted=frozenset(emitted)), events


# ---------------------------------------------------------------------------


def run(config: ScenarioConfig) -> SimulationResult:
    state = initial_state(config)
    worlds = [state.world]
    events: list[Event] = []
    assignment = None
    max_ticks = int(math.floor(config.max_time / config.dt + 1e-9))
    complete = False
    while True:
        new_state, ev = tick(state, config)
        events.extend(ev)
        if new_state.episode is not None and new_state.episode.assignment is not None:
            assignment = new_state.episode.assignment
        if new_state.done:
            complete = True
            break
        state = new_state
        worlds.append(state.world)
        if state.world.tick >= max_ticks:
            break
    events.sort(key=lambda e: e.time)
    return SimulationResult(config, worlds, events, complete, assignment)
