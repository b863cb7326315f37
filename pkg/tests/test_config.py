import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from swarm_reshape.config import (
    ScenarioError,
    SimMode,
    dump_scenario,
    load_reference,
    load_scenario,
    parse_scenario,
)

MINIMAL = """
[swarm]
n_agents = 7

[obstacle.1]
vertices = 100 3; 116 3; 116 23; 100 23
"""


def test_minimal_file_gets_defaults():
    cfg = parse_scenario(MINIMAL)
    assert cfg.n_agents == 7 and cfg.formation.n_agents == 7
    assert cfg.dt == 0.1 and cfg.agent_speed == 2.0 and cfg.follower_speed_factor == 1.3
    assert cfg.formation.spacing == 10.0 and cfg.formation.half_angle == math.pi / 4
    assert cfg.detection_range == 30.0 and cfg.queue_gap == 5.0 and cfg.clearance == 3.0
    assert cfg.safe_dist == 2 * cfg.clearance + 1
    assert cfg.mode is SimMode.DFRPSR
    assert cfg.obstacles == (((100.0, 3.0), (116.0, 3.0), (116.0, 23.0), (100.0, 23.0)),)


@pytest.mark.parametrize("text,field", [
    (MINIMAL.replace("n_agents = 7", "n_agents = 7\ndt = 0"), "swarm.dt"),
    (MINIMAL.replace("100 3; 116 3; 116 23; 100 23", "0 0; 4 0; 1 1; 0 4"), "obstacle[0]"),
    (MINIMAL.replace("n_agents = 7", "n_agents = 7\nmode = fast"), "swarm.mode"),
    (MINIMAL.replace("n_agents = 7", "n_agents = 7\nspeed = 3"), "swarm.speed"),
    ("[swarm]\nagent_speed = 2\n", "swarm.n_agents"),
    ("[swarm\n", "file"),
    (MINIMAL.replace("n_agents = 7", "n_agents = 7\nagent_speed = -1"), "swarm.agent_speed"),
])
def test_validation_names_the_field(text, field):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.field == field
    assert field in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError) as info:
        load_scenario(tmp_path / "nope.ini")
    assert info.value.field == "file"


def test_reference_scenario_loads():
    cfg = load_reference()
    assert cfg.n_agents == 7 and len(cfg.obstacles) == 2
    assert load_reference(SimMode.BASELINE).mode is SimMode.BASELINE


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=20),
       st.floats(min_value=0.1, max_value=10.0),
       st.floats(min_value=0.001, max_value=1.0),
       st.floats(min_value=-math.pi, max_value=math.pi),
       st.sampled_from(list(SimMode)))
def test_dump_parse_round_trip(n, speed, dt, heading, mode):
    cfg = parse_scenario(MINIMAL)
    from swarm_reshape.core import Pose, Vec2
    from swarm_reshape.formation import FormationSpec
    cfg = replace(cfg, n_agents=n, formation=FormationSpec(n, 7.5, 0.6), agent_speed=speed, dt=dt,
                  start_leader_pose=Pose(Vec2(1.25, -3.0), heading), mode=mode)
    assert parse_scenario(dump_scenario(cfg)) == cfg


def test_file_round_trip(tmp_path):
    cfg = load_reference()
    path = tmp_path / "s.ini"
    path.write_text(dump_scenario(cfg))
    assert load_scenario(path) == cfg
