"""Built-in oracle suites: annealer against exact assignment, gap width against
dense boundary sampling, and temporary-leader chain connectivity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .core import AgentState, Obstacle, Pose, Vec2, WorldState
from .registration import anneal_assignment, exact_assignment, squared_distances
from .reshape import MergeDirection, queue_order, temp_leader_table
from .sensing import Detection, compute_gap

MARGIN = 1e-6


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    checked: int
    skipped: int = 0
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f", {self.skipped} skipped" if self.skipped else ""
        text = f"{status} {self.name}: {self.checked} checked{extra}"
        return f"{text} ({self.detail})" if self.detail else text


# ---------------------------------------------------------------------------
# assignment


def optimality_margin(cost: np.ndarray) -> float:
    """Cost gap between the best and second-best permutations.

    Any other permutation drops at least one pair of the optimum, so the
    runner-up is the best solution with one optimal pair forbidden.
    """
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    n = cost.shape[0]
    if n < 2:
        return math.inf
    big = float(np.abs(cost).sum()) * 4.0 + 1.0
    second = math.inf
    for i, j in zip(rows, cols):
        c = cost.copy()
        c[i, j] = big
        r2, c2 = linear_sum_assignment(c)
        second = min(second, float(c[r2, c2].sum()))
    return second - best


def annealer_instances(count: int = 200, seed: int = 20240607, sizes=range(2, 11)):
    rng = np.random.default_rng(seed)
    sizes = list(sizes)
    for k in range(count):
        n = sizes[k % len(sizes)]
        yield rng.uniform(0.0, 100.0, (n, 2)), rng.uniform(0.0, 100.0, (n, 2))


def suite_annealer(count: int = 200, seed: int = 20240607) -> SuiteResult:
    checked = skipped = 0
    failures = []
    for k, (c, t) in enumerate(annealer_instances(count, seed)):
        cost = squared_distances(c, t)
        if optimality_margin(cost) <= MARGIN:
            skipped += 1
            continue
        checked += 1
        got = anneal_assignment(c, t)
        want = exact_assignment(cost)
        if got.slot_of != want.slot_of:
            failures.append(k)
    detail = f"mismatched instances {failures}" if failures else ""
    ok = not failures and checked >= 0.95 * count
    if checked < 0.95 * count:
        detail = (detail + "; " if detail else "") + "too many degenerate draws"
    return SuiteResult("annealer matches exact assignment", ok, checked, skipped, detail)


# ---------------------------------------------------------------------------
# gap width


def random_convex_polygon(rng: np.random.Generator, center: tuple[float, float], radius: float,
                          k: int, oid: int) -> Obstacle:
    """Vertices on a rotated, stretched circle: always strictly convex."""
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, k))
    while np.min(np.diff(np.concatenate([angles, angles[:1] + 2.0 * math.pi]))) < 0.05:
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, k))
    stretch = rng.uniform(0.4, 1.0)
    rot = rng.uniform(0.0, 2.0 * math.pi)
    pts = np.column_stack([np.cos(angles), stretch * np.sin(angles)]) * radius
    rmat = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])
    pts = pts @ rmat.T + np.asarray(center)
    return Obstacle(oid, tuple(Vec2(float(x), float(y)) for x, y in pts))


def random_polygon_pair(rng: np.random.Generator) -> tuple[Obstacle, Obstacle]:
    r1, r2 = rng.uniform(2.0, 10.0, 2)
    a = random_convex_polygon(rng, (0.0, 0.0), r1, int(rng.integers(3, 9)), 1)
    ang = rng.uniform(0.0, 2.0 * math.pi)
    d = r1 + r2 + rng.uniform(0.5, 15.0)
    b = random_convex_polygon(rng, (d * math.cos(ang), d * math.sin(ang)), r2, int(rng.integers(3, 9)), 2)
    return a, b


def sample_boundary(obs: Obstacle, count: int = 10_000) -> np.ndarray:
    """``count`` points along the boundary, spaced by arc length, vertices included."""
    v = np.array([p.as_tuple() for p in obs.vertices])
    nxt = np.roll(v, -1, axis=0)
    lengths = np.linalg.norm(nxt - v, axis=1)
    per = np.maximum(1, np.round(count * lengths / lengths.sum()).astype(int))
    out = []
    for p, q, m in zip(v, nxt, per):
        s = np.arange(m)[:, None] / m
        out.append(p + s * (q - p))
    return np.vstack(out)


def sampled_gap(a: Obstacle, b: Obstacle, count: int = 10_000) -> float:
    pa, pb = sample_boundary(a, count), sample_boundary(b, count)
    d, _ = cKDTree(pb).query(pa)
    return float(d.min())


def _gap_world(a: Obstacle, b: Obstacle) -> WorldState:
    # observer far from both polygons; only the width matters here
    far = Vec2(-1000.0, -1000.0)
    agent = AgentState.create(1, Pose(far, 0.0), 1.0)
    return WorldState(0, 0.1, (agent,), (a, b), Vec2(0.0, 0.0))


def gap_width(a: Obstacle, b: Obstacle) -> float:
    world = _gap_world(a, b)
    dets = [Detection(o.id, 0.0, 0.0, o.vertices[0]) for o in (a, b)]
    return compute_gap(dets, world).width


def suite_gap(count: int = 50, seed: int = 7, samples: int = 10_000, tol: float = 1e-3) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, []
    for k in range(count):
        a, b = random_polygon_pair(rng)
        err = abs(gap_width(a, b) - sampled_gap(a, b, samples))
        worst = max(worst, err)
        if err > tol:
            bad.append(k)
    detail = f"worst error {worst:.2e} m" + (f", failing pairs {bad}" if bad else "")
    return SuiteResult("gap width matches boundary sampling", not bad, count, 0, detail)


# ---------------------------------------------------------------------------
# chains


def chain_problems(n: int, direction: MergeDirection) -> list[str]:
    """Independent graph check: one parent per follower, one child per agent, all reach id 1."""
    table = temp_leader_table(n, direction)
    problems = []
    if set(table) != set(range(2, n + 1)):
        problems.append("followers missing from table")
    kids: dict[int, int] = {}
    for child, parent in table.items():
        if not 1 <= parent <= n or parent == child:
            problems.append(f"{child} -> {parent} invalid")
        kids[parent] = kids.get(parent, 0) + 1
    for parent, k in kids.items():
        if k > 1:
            problems.append(f"{parent} leads {k} agents")
    for start in table:
        seen, node = set(), start
        while node != 1:
            if node in seen:
                problems.append(f"cycle through {start}")
                break
            seen.add(node)
            node = table[node]
    return problems


def suite_chains(sizes=range(3, 16)) -> SuiteResult:
    bad = []
    checked = 0
    for n in sizes:
        for direction in MergeDirection:
            checked += 1
            problems = chain_problems(n, direction)
            try:
                order = queue_order(n, direction)
            except ValueError as exc:
                problems.append(str(exc))
                order = []
            if direction is MergeDirection.LEFT_INTO_RIGHT and order != list(range(1, n + 1)):
                problems.append("LeftIntoRight order is not 1..n")
            if problems:
                bad.append(f"n={n} {direction.value}: {'; '.join(problems)}")
    return SuiteResult("temporary-leader chains are single paths", not bad, checked, 0, " | ".join(bad))


SUITES: dict[str, Callable[[], SuiteResult]] = {
    "annealer": suite_annealer,
    "gap": suite_gap,
    "chains": suite_chains,
}


def run_all(names=None) -> list[SuiteResult]:
    names = list(SUITES) if names is None else names
    return [SUITES[name]() for name in names]
