import math

import numpy as np
import pytest

from scenfuzz.behaviors import BEHAVIORS, BehaviorContext, create_behavior, default_spec, get_behavior
from scenfuzz.config import SimulationConfig
from scenfuzz.exceptions import InfeasibleSample
from scenfuzz.features import SamplePoint, instantiate
from scenfuzz.parser import parse
from scenfuzz.simulator import run_rollout
from scenfuzz.state import AgentState, WorldState
from scenfuzz.sut import make_sut

RNG = np.random.default_rng(0)


def context(straight_map, lanes=("a", "b"), start=(0.0, 0.0, 0.0)):
    return BehaviorContext(map=straight_map, dt=0.1, lanes=lanes, start=start)


def world_with(*agents, time=0.0):
    return WorldState(time, tuple(agents), ego_lane="a")


def car(name, x, y=0.0, speed=10.0):
    return AgentState(name, "car", x, y, 0.0, speed, lane="a")


def test_registry_holds_every_builtin():
    assert set(BEHAVIORS) == {
        "FollowLane", "FollowVehicle", "LaneChange", "PullIn", "Brake", "Park", "CrossRoad", "Wait",
    }
    assert get_behavior("Fly") is None


class TestBind:
    def test_defaults_filled(self):
        spec = BEHAVIORS["Brake"].bind({"decel": 6})
        assert spec.as_dict() == {"speed": 10.0, "decel": 6.0, "trigger_distance": 20.0, "delay": 0.0}

    def test_missing_required(self):
        with pytest.raises(InfeasibleSample, match="target_lane"):
            BEHAVIORS["LaneChange"].bind({})

    def test_negative_value(self):
        with pytest.raises(InfeasibleSample):
            BEHAVIORS["Brake"].bind({"decel": -1.0})

    def test_non_finite_value(self):
        with pytest.raises(InfeasibleSample):
            BEHAVIORS["FollowLane"].bind({"speed": math.inf})

    def test_pull_in_defaults_to_anchor_lane(self):
        spec = BEHAVIORS["PullIn"].bind({}, defaults={"target_lane": "a"})
        assert spec.get("target_lane") == "a"

    def test_default_specs(self):
        assert default_spec("car", 7.0).as_dict()["speed"] == 7.0
        assert default_spec("pedestrian", 0.0).name == "Wait"


class TestVehicleBehaviors:
    def test_follow_lane_cruises(self, straight_map):
        behavior = create_behavior(BEHAVIORS["FollowLane"].bind({"speed": 12}), context(straight_map))
        action = behavior.action(car("x", 20), world_with(car("ego", 0), car("x", 20)), RNG)
        assert action.accel == pytest.approx(2.0)
        assert action.path == ("a", "b")

    def test_follow_vehicle_keeps_gap(self, straight_map):
        spec = BEHAVIORS["FollowVehicle"].bind({"speed": 10, "leader": "lead"})
        behavior = create_behavior(spec, context(straight_map))
        follower, lead = car("x", 20), car("lead", 30, speed=5)
        action = behavior.action(follower, world_with(car("ego", 0), follower, lead), RNG)
        # 0.5 * (5 - 10) + 0.2 * (10 - 15)
        assert action.accel == pytest.approx(-3.5)

    def test_follow_vehicle_finds_nearest_leader(self, straight_map):
        behavior = create_behavior(BEHAVIORS["FollowVehicle"].bind({"speed": 10}), context(straight_map))
        follower = car("x", 20)
        world = world_with(car("ego", 0), follower, car("far", 80), car("near", 40), car("beside", 25, y=3.5))
        assert behavior.find_leader(follower, world)[0].name == "near"

    def test_brake_after_delay(self, straight_map):
        spec = BEHAVIORS["Brake"].bind({"decel": 5, "trigger_distance": 30, "delay": 0.5})
        behavior = create_behavior(spec, context(straight_map))
        lead = car("lead", 20)
        assert behavior.action(lead, world_with(car("ego", 0), lead), RNG).accel == pytest.approx(0.0)
        assert behavior.memory["triggered"] == 0.0
        action = behavior.action(lead, world_with(car("ego", 0), lead, time=0.5), RNG)
        assert action.accel == pytest.approx(-5.0)
        assert action.label == "brake"

    def test_lane_change_shifts_left(self, straight_map):
        spec = BEHAVIORS["LaneChange"].bind({"target_lane": "a_left", "duration": 2})
        behavior = create_behavior(spec, context(straight_map))
        mover = car("x", 20)
        first = behavior.action(mover, world_with(car("ego", 0), mover), RNG)
        halfway = behavior.action(mover, world_with(car("ego", 0), mover, time=1.0), RNG)
        done = behavior.action(mover, world_with(car("ego", 0), mover, time=2.0), RNG)
        assert first.lateral == pytest.approx(0.0)
        assert halfway.lateral == pytest.approx(1.75)
        assert done.lateral == pytest.approx(3.5)
        assert done.label == "lane_change"

    def test_lane_change_waits_for_trigger_time(self, straight_map):
        spec = BEHAVIORS["LaneChange"].bind({"target_lane": "a_left", "trigger_time": 1})
        behavior = create_behavior(spec, context(straight_map))
        mover = car("x", 20)
        assert behavior.action(mover, world_with(car("ego", 0), mover), RNG).label == "follow"

    def test_pull_in_waits_for_ego(self, straight_map):
        spec = BEHAVIORS["PullIn"].bind({"target_lane": "a", "trigger_distance": 15})
        behavior = create_behavior(spec, context(straight_map, start=(50.0, -3.0, 0.0)))
        parked = car("p", 50, y=-3.0, speed=0.0)
        assert behavior.action(parked, world_with(car("ego", 0), parked), RNG).label == "wait"
        action = behavior.action(parked, world_with(car("ego", 40), parked, time=1.0), RNG)
        assert action.label == "pull_in"

    def test_park(self, straight_map):
        behavior = create_behavior(BEHAVIORS["Park"].bind({}), context(straight_map))
        assert behavior.action(car("p", 50), world_with(car("ego", 0), car("p", 50)), RNG).speed == 0.0


class TestPedestrianBehaviors:
    def test_cross_road_phases(self, straight_map):
        source = (
            'ego = car on lane "a" at 10, speed 10\n'
            "agent walker = pedestrian at (150, -6) heading pi / 2, "
            "behavior CrossRoad(speed=1, distance=4, wait_inside=1)\n"
            "terminate after 6\n"
        )
        scene = instantiate(parse(source), SamplePoint(), straight_map)
        sut = make_sut("builtin", straight_map, scene.route, cruise_speed=scene.cruise_speed)
        trace = run_rollout(scene, sut, straight_map, 0.1, 10.0, SimulationConfig())
        walker = [w.agent("walker") for w in trace.steps]
        assert walker[10].y == pytest.approx(-5.0)
        assert walker[25].y == pytest.approx(-4.0)
        assert walker[25].speed == 0.0
        assert walker[-1].y == pytest.approx(-2.0)
        assert all(w.x == pytest.approx(150.0) for w in walker)

    def test_cross_road_waits_before(self, straight_map):
        spec = BEHAVIORS["CrossRoad"].bind({"wait_before": 2})
        behavior = create_behavior(spec, context(straight_map, lanes=(), start=(150.0, -6.0, math.pi / 2)))
        walker = AgentState("w", "pedestrian", 150.0, -6.0, math.pi / 2)
        assert behavior.action(walker, world_with(car("ego", 0), walker), RNG).waypoint is None
        action = behavior.action(walker, world_with(car("ego", 0), walker, time=2.0), RNG)
        assert action.waypoint == pytest.approx((150.0, -1.0))

    def test_waits_count_from_first_action(self, straight_map):
        spec = BEHAVIORS["CrossRoad"].bind({"wait_before": 2})
        behavior = create_behavior(spec, context(straight_map, lanes=(), start=(150.0, -6.0, math.pi / 2)))
        walker = AgentState("w", "pedestrian", 150.0, -6.0, math.pi / 2)
        assert behavior.action(walker, world_with(car("ego", 0), walker, time=5.0), RNG).waypoint is None
        assert behavior.action(walker, world_with(car("ego", 0), walker, time=6.5), RNG).waypoint is None
        assert behavior.action(walker, world_with(car("ego", 0), walker, time=7.0), RNG).waypoint is not None

    def test_wait_counts_from_first_action(self, straight_map):
        spec = BEHAVIORS["Wait"].bind({"duration": 1, "speed": 1.2})
        behavior = create_behavior(spec, context(straight_map, lanes=()))
        walker = AgentState("w", "pedestrian", 0.0, -5.0, 0.0)
        assert behavior.action(walker, world_with(car("ego", 0), walker, time=3.0), RNG).label == "wait"
        assert behavior.action(walker, world_with(car("ego", 0), walker, time=3.5), RNG).label == "wait"
        assert behavior.action(walker, world_with(car("ego", 0), walker, time=4.0), RNG).speed == 1.2

    def test_wait_then_walk(self, straight_map):
        spec = BEHAVIORS["Wait"].bind({"duration": 1, "speed": 1.2})
        behavior = create_behavior(spec, context(straight_map, lanes=()))
        walker = AgentState("w", "pedestrian", 0.0, -5.0, 0.0)
        assert behavior.action(walker, world_with(car("ego", 0), walker), RNG).label == "wait"
        assert behavior.action(walker, world_with(car("ego", 0), walker, time=1.0), RNG).speed == 1.2
