import copy
import json
import logging
from pathlib import Path

import pytest

from scenfuzz.config import BudgetConfig, CampaignConfig, SamplerConfig, SimulationConfig
from scenfuzz.maps import parse_map
from scenfuzz.parser import parse

# Two chained lanes with a left neighbour on the first, plus a circular zone
STRAIGHT_MAP = {
    "name": "straight",
    "lanes": [
        {"id": "a", "centerline": [[0, 0], [200, 0]], "width": 3.5, "successors": ["b"], "left": "a_left"},
        {"id": "b", "centerline": [[200, 0], [400, 0]], "width": 3.5},
        {"id": "a_left", "centerline": [[0, 3.5], [200, 3.5]], "width": 3.5, "right": "a"},
    ],
    "intersections": [],
    "regions": {
        "zone": {"type": "circle", "center": [150, 0], "radius": 10},
        "strip": {"type": "lane_segment", "lane": "a", "start": 50, "end": 60},
    },
}

# Ego cruises alone; nothing can be violated
LONE_SCENARIO = """\
map "straight.map"
param v = uniform(8, 12)
ego = car on lane "a" at 10, speed v, behavior FollowLane(speed=v)
terminate after 3
"""

# Ego never moves, so the progress metric is always violated
STALLED_SCENARIO = """\
map "straight.map"
param gap = uniform(20, 40)
ego = car on lane "a" at 10, speed 0, behavior FollowLane(speed=0)
agent other = car on lane "a" at 10 + gap, speed 5, behavior FollowLane(speed=5)
terminate after 2
"""

# Lead brakes hard as soon as the run starts
FOLLOW_SCENARIO = """\
map "straight.map"
param gap = uniform(8, 30)
param decel = uniform(2, 8)
ego = car on lane "a" at 10, speed 10, behavior FollowLane(speed=10)
agent lead = car on lane "a" at 10 + gap, speed 10, behavior Brake(speed=10, decel=decel, trigger_distance=100)
terminate after 3
"""


@pytest.fixture
def straight_doc():
    return copy.deepcopy(STRAIGHT_MAP)


@pytest.fixture
def straight_map(straight_doc):
    return parse_map(straight_doc, source="straight.map")


@pytest.fixture
def map_file(tmp_path, straight_doc):
    path = tmp_path / "straight.map"
    path.write_text(json.dumps(straight_doc), encoding="utf-8")
    return path


@pytest.fixture
def write_scenario(tmp_path, map_file):
    """Write a scenario next to straight.map and return its path"""

    def _write(source: str, name: str = "scenario.scn") -> Path:
        path = tmp_path / name
        path.write_text(source, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def program():
    def _parse(source: str, name: str = "main"):
        return parse(source, name=name)

    return _parse


@pytest.fixture
def campaign_config(tmp_path):
    """CampaignConfig factory with a sample budget and no time budget"""

    def _config(scenario, out="out", max_samples=4, **changes) -> CampaignConfig:
        sampler = changes.pop("sampler", SamplerConfig(kind="halton"))
        simulation = changes.pop("simulation", SimulationConfig(horizon=10.0))
        return CampaignConfig(
            scenario=str(scenario),
            out=str(tmp_path / out),
            sampler=sampler,
            budget=BudgetConfig(max_samples=max_samples, max_seconds=None),
            simulation=simulation,
            enable_profiling=False,
            **changes,
        )

    return _config


@pytest.fixture(autouse=True)
def restore_logging():
    """Commands reconfigure the root logger; put it back afterwards"""
    root = logging.getLogger()
    package = logging.getLogger("scenfuzz")
    handlers, level, package_level = list(root.handlers), root.level, package.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
    package.setLevel(package_level)
