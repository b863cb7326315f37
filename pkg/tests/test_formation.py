import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarm_reshape.core import AgentState, Pose, Vec2, WorldState
from swarm_reshape.formation import (
    FormationSpec,
    current_shape,
    formation_waypoint,
    slot_offset,
    slot_positions,
)

ORIGIN = Pose(Vec2(0.0, 0.0), 0.0)


def test_three_agent_slots():
    spec = FormationSpec(3, math.sqrt(2.0), math.pi / 4)
    got = slot_positions(ORIGIN, spec)
    np.testing.assert_allclose(got, [[0, 0], [-1, 1], [-1, -1]], atol=1e-12)


def test_single_agent_is_only_the_leader():
    np.testing.assert_array_equal(slot_positions(ORIGIN, FormationSpec(1)), [[0.0, 0.0]])


@pytest.mark.parametrize("aid,expected", [(2, (-1.0, 1.0)), (3, (-1.0, -1.0))])
def test_formation_waypoint_examples(aid, expected):
    spec = FormationSpec(3, math.sqrt(2.0), math.pi / 4)
    leader = AgentState.create(1, ORIGIN, 1.0)
    agent = AgentState.create(aid, Pose(Vec2(-20.0, 3.0), 1.0), 1.0)
    wp = formation_waypoint(agent, leader, spec)
    assert wp.as_tuple() == pytest.approx(expected, abs=1e-12)


def test_formation_waypoint_rejects_leader():
    leader = AgentState.create(1, ORIGIN, 1.0)
    with pytest.raises(ValueError):
        formation_waypoint(leader, leader, FormationSpec(3))


def test_current_shape_fixed_point_and_single_agent():
    spec = FormationSpec(5, 10.0, math.pi / 4)
    pose = Pose(Vec2(3.0, -2.0), 0.7)
    slots = slot_positions(pose, spec)
    agents = tuple(AgentState.create(k + 1, Pose(Vec2(*slots[k]), 0.7), 1.0) for k in range(5))
    np.testing.assert_array_equal(current_shape(WorldState(0, 0.1, agents)), slots)
    lone = AgentState.create(1, Pose(Vec2(5.0, 3.0), 0.0), 1.0)
    np.testing.assert_array_equal(current_shape(WorldState(0, 0.1, (lone,))), [[5.0, 3.0]])


@pytest.mark.parametrize("kwargs", [
    dict(n_agents=0), dict(n_agents=3, spacing=0.0), dict(n_agents=3, half_angle=math.pi / 2),
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        FormationSpec(**kwargs)


angles = st.floats(min_value=-math.pi, max_value=math.pi)
coords = st.floats(min_value=-1e3, max_value=1e3)


@given(coords, coords, angles, st.integers(min_value=1, max_value=15),
       st.floats(min_value=0.5, max_value=30.0), st.floats(min_value=0.05, max_value=1.5))
def test_rigid_motion_equivariance(x, y, heading, n, spacing, half):
    spec = FormationSpec(n, spacing, half)
    base = slot_positions(ORIGIN, spec)
    c, s = math.cos(heading), math.sin(heading)
    expected = base @ np.array([[c, s], [-s, c]]) + [x, y]
    np.testing.assert_allclose(slot_positions(Pose(Vec2(x, y), heading), spec), expected, atol=1e-9)


@given(st.integers(min_value=2, max_value=40), st.floats(min_value=0.5, max_value=30.0),
       st.floats(min_value=0.05, max_value=1.5))
def test_mirror_siblings_and_leg_spacing(n, spacing, half):
    spec = FormationSpec(n, spacing, half)
    for aid in range(2, n + 1, 2):
        back, side = slot_offset(aid, spec)
        assert side > 0.0 and back < 0.0
        if aid + 1 <= n:
            assert slot_offset(aid + 1, spec) == (back, -side)
        if aid + 2 <= n:
            nxt = slot_offset(aid + 2, spec)
            assert math.dist(nxt, (back, side)) == pytest.approx(spacing, rel=1e-12)
    assert math.dist(slot_offset(2, spec), (0.0, 0.0)) == pytest.approx(spacing, rel=1e-12)
