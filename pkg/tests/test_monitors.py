import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenfuzz.config import MonitorConfig
from scenfuzz.exceptions import UnknownLane
from scenfuzz.maps import parse_map
from scenfuzz.monitors import (
    METRICS,
    RhoVector,
    TtcCase,
    TtcRoots,
    count_violations,
    evaluate,
    metric_distance,
    metric_lane,
    metric_progress,
    metric_ttc,
    ttc_margin,
    ttc_roots,
)
from scenfuzz.state import AgentState, WorldState

from .conftest import STRAIGHT_MAP


def world(time=0.0, ego=(0.0, 0.0), ego_speed=10.0, other=(20.0, 0.0), other_speed=5.0, kind="car", lane="a"):
    agents = [AgentState("ego", "car", ego[0], ego[1], 0.0, ego_speed, lane="a")]
    if other is not None:
        agents.append(AgentState("other", kind, other[0], other[1], 0.0, other_speed, lane="a"))
    return WorldState(time, tuple(agents), ego_lane=lane)


class TestTtcRoots:
    def test_closing_head_on(self):
        roots = ttc_roots((10.0, 0.0), (-5.0, 0.0), 5.0)
        assert roots.case == TtcCase.ROOTS
        assert (roots.t1, roots.t2) == pytest.approx((1.0, 3.0))

    def test_passing_wide(self):
        assert ttc_roots((10.0, 0.0), (0.0, 5.0), 5.0).case == TtcCase.NO_REAL_ROOTS

    def test_relative_rest(self):
        assert ttc_roots((10.0, 0.0), (0.0, 0.0), 5.0).case == TtcCase.RELATIVE_REST_SAFE
        assert ttc_roots((3.0, 0.0), (0.0, 0.0), 5.0).case == TtcCase.RELATIVE_REST_VIOLATING

    def test_receding(self):
        roots = ttc_roots((10.0, 0.0), (5.0, 0.0), 5.0)
        assert roots.t2 < 0
        assert ttc_margin(roots, 2.0, 100.0) == 100.0

    def test_already_inside_is_negative(self):
        roots = ttc_roots((3.0, 0.0), (-1.0, 0.0), 5.0)
        assert roots.t1 == pytest.approx(-2.0)
        assert ttc_margin(roots, 2.0, 100.0) == pytest.approx(-4.0)

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            ttc_roots((1.0, 0.0), (1.0, 0.0), 0.0)

    def test_rest_margins(self):
        assert ttc_margin(TtcRoots(TtcCase.RELATIVE_REST_VIOLATING), 2.0, 100.0) == -2.0
        assert ttc_margin(TtcRoots(TtcCase.RELATIVE_REST_SAFE), 2.0, 100.0) == 100.0


class TestMetrics:
    def test_distance(self):
        assert metric_distance([world()]) == pytest.approx(15.0)
        assert metric_distance([world(other=(3.0, 0.0))]) == pytest.approx(-2.0)

    def test_distance_ignores_pedestrians_by_default(self):
        steps = [world(other=(1.0, 0.0), kind="pedestrian")]
        assert metric_distance(steps) == 100.0
        assert metric_distance(steps, MonitorConfig(include_pedestrians=True)) == pytest.approx(-4.0)

    def test_distance_without_others_is_capped(self):
        assert metric_distance([world(other=None)]) == 100.0

    def test_ttc(self):
        assert metric_ttc([world()]) == pytest.approx(1.0)

    def test_ttc_violation(self):
        assert metric_ttc([world(other=(12.0, 0.0), other_speed=0.0)]) < 0

    def test_progress(self):
        steps = [world(ego=(0.0, 0.0)), world(time=1.0, ego=(30.0, 0.0))]
        assert metric_progress(steps) == pytest.approx(19.0)

    def test_progress_single_step(self):
        assert metric_progress([world()]) == -11.0

    def test_lane(self, straight_map):
        assert metric_lane([world(ego=(10.0, 0.2))], straight_map) == pytest.approx(0.3)

    def test_lane_needs_recorded_lane(self, straight_map):
        with pytest.raises(UnknownLane):
            metric_lane([world(lane=None)], straight_map)


class TestRhoVector:
    def test_flags_follow_metric_order(self):
        rho = RhoVector(progress=-1.0, distance=2.0, ttc=0.0, lane=-0.1)
        assert rho.values() == (-1.0, 2.0, 0.0, -0.1)
        assert rho.flags() == (True, False, False, True)
        assert rho.violated
        assert rho.violation_count == 2
        assert RhoVector.from_dict(rho.to_dict()) == rho

    def test_count_violations(self):
        vectors = [RhoVector(-1.0, 1.0, 1.0, 1.0), RhoVector(-1.0, -1.0, 1.0, 1.0)]
        assert count_violations(vectors) == {"progress": 2, "distance": 1, "ttc": 0, "lane": 0}
        assert tuple(count_violations([])) == METRICS


def test_evaluate_stationary_ego(straight_map):
    steps = [world(time=t, ego_speed=0.0, other=(8.0, 0.0), other_speed=0.0) for t in (0.0, 0.1)]
    rho = evaluate(steps, straight_map)
    assert rho.progress == pytest.approx(-11.0)
    assert rho.distance == pytest.approx(3.0)
    assert rho.ttc == 100.0
    assert rho.lane == pytest.approx(0.5)


LANE_MAP = parse_map(copy.deepcopy(STRAIGHT_MAP), source="straight.map")
THRESHOLDS = MonitorConfig()
SETTLED = 1e-6


@st.composite
def traces(draw):
    """Short car-only traces with the ego on lane a"""
    steps = []
    n_others = draw(st.integers(0, 3))
    for i in range(draw(st.integers(1, 6))):
        ego = AgentState(
            "ego",
            "car",
            draw(st.floats(0.0, 200.0)),
            draw(st.floats(-3.0, 3.0)),
            draw(st.floats(-math.pi, math.pi)),
            draw(st.floats(0.0, 20.0)),
            lane="a",
        )
        others = tuple(
            AgentState(
                f"car{j}",
                "car",
                ego.x + draw(st.floats(-30.0, 30.0)),
                ego.y + draw(st.floats(-30.0, 30.0)),
                draw(st.floats(-math.pi, math.pi)),
                draw(st.floats(0.0, 20.0)),
            )
            for j in range(n_others)
        )
        steps.append(WorldState(0.1 * i, (ego,) + others, ego_lane="a"))
    return steps


def closest_within(p, v, horizon, dt=0.001):
    """Smallest separation over [0, horizon] by stepping the relative motion forward"""
    moves = np.tile(np.asarray(v, dtype=float) * dt, (int(round(horizon / dt)), 1))
    path = np.vstack([np.asarray(p, dtype=float), np.asarray(p, dtype=float) + np.cumsum(moves, axis=0)])
    return float(np.hypot(path[:, 0], path[:, 1]).min())


def velocity(agent):
    return np.array([agent.speed * math.cos(agent.heading), agent.speed * math.sin(agent.heading)])


@settings(max_examples=1000, deadline=None)
@given(steps=traces())
def test_verdicts_match_a_direct_scan(steps):
    rho = evaluate(steps, LANE_MAP, THRESHOLDS)
    gaps = [
        math.hypot(o.x - w.ego.x, o.y - w.ego.y) for w in steps for o in w.agents if o.name != "ego"
    ]
    if abs(rho.distance) > SETTLED:
        assert (rho.distance < 0) == any(g < THRESHOLDS.distance for g in gaps)
    if abs(rho.progress) > SETTLED:
        moved = np.hypot(steps[-1].ego.x - steps[0].ego.x, steps[-1].ego.y - steps[0].ego.y)
        assert (rho.progress < 0) == (len(steps) < 2 or moved < THRESHOLDS.progress)
    if abs(rho.lane) > SETTLED:
        deviation = np.mean([abs(w.ego.y) for w in steps])
        assert (rho.lane < 0) == (deviation > THRESHOLDS.lane)


@settings(max_examples=1000, deadline=None)
@given(steps=traces())
def test_ttc_verdict_matches_forward_integration(steps):
    rho = metric_ttc(steps, THRESHOLDS)
    closest = [
        closest_within((o.x - w.ego.x, o.y - w.ego.y), velocity(o) - velocity(w.ego), THRESHOLDS.ttc)
        for w in steps
        for o in w.agents
        if o.name != "ego"
    ]
    if abs(rho) <= SETTLED or any(abs(c - THRESHOLDS.distance) < 1e-3 for c in closest):
        return
    assert (rho < 0) == any(c < THRESHOLDS.distance for c in closest)
