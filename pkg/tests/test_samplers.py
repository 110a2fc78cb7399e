import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenfuzz.config import SamplerConfig
from scenfuzz.exceptions import ConfigError, StaleFeedback
from scenfuzz.features import ContinuousDim, DiscreteDim, FeatureSpace, SamplePoint
from scenfuzz.samplers import (
    Feedback,
    SamplerState,
    draw_batch,
    halton_value,
    initial_state,
    next_point,
    observe,
    primes,
    ucb_scores,
)

SPACE = FeatureSpace(
    continuous=(ContinuousDim("gap", 8.0, 30.0),),
    discrete=(DiscreteDim("side", ("a", "b")),),
)
GAP_ONLY = FeatureSpace(continuous=(ContinuousDim("gap", 0.0, 1.0),))


def test_primes():
    assert primes(6) == [2, 3, 5, 7, 11, 13]


@pytest.mark.parametrize("index,base,expected", [(0, 2, 0.0), (1, 2, 0.5), (2, 2, 0.25), (3, 2, 0.75), (1, 3, 1 / 3)])
def test_halton_value(index, base, expected):
    assert halton_value(index, base) == pytest.approx(expected)


def test_halton_value_rejects_negative_index():
    with pytest.raises(ValueError):
        halton_value(-1, 2)


class TestFeedback:
    def test_reward_is_fraction_of_violations(self):
        assert Feedback(SamplePoint(), rho=(-1.0, 2.0, -0.5, 3.0)).reward == 0.5

    def test_infeasible_reward_is_zero(self):
        assert Feedback(SamplePoint(), rho=(-1.0,), feasible=False).reward == 0.0


class TestInitialState:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            initial_state(SamplerConfig(kind="sobol"), SPACE)

    def test_mab_arms_per_dimension(self):
        state = initial_state(SamplerConfig(kind="mab", bins=4), SPACE, seed=3, campaign_id="c1")
        assert state.counts == ((0, 0, 0, 0), (0, 0))
        assert state.pending == ((0, 0, 0, 0), (0, 0))
        assert state.campaign_id == "c1"

    def test_state_dict_round_trip(self):
        state = initial_state(SamplerConfig(kind="mab", bins=3), SPACE, seed=7)
        _, state = next_point(state, SPACE)
        assert SamplerState.from_dict(state.to_dict()) == state


class TestHalton:
    def test_sequence_starts_at_index_one(self):
        state = initial_state(SamplerConfig(kind="halton"), SPACE)
        first, state = next_point(state, SPACE)
        second, state = next_point(state, SPACE)
        assert first.unit == (0.5,)
        assert first.continuous == (19.0,)
        assert first.discrete == (0,)
        assert second.unit == (0.25,)
        assert second.discrete == (1,)
        assert state.halton_index == 2

    def test_restored_state_continues_sequence(self):
        state = initial_state(SamplerConfig(kind="halton"), SPACE)
        _, state = draw_batch(state, SPACE, 5)
        expected, _ = draw_batch(state, SPACE, 3)
        resumed, _ = draw_batch(SamplerState.from_dict(state.to_dict()), SPACE, 3)
        assert resumed == expected


class TestRandom:
    def test_same_seed_same_points(self):
        state = initial_state(SamplerConfig(kind="random"), SPACE, seed=11)
        assert draw_batch(state, SPACE, 4)[0] == draw_batch(state, SPACE, 4)[0]

    def test_different_seeds_differ(self):
        a = draw_batch(initial_state(SamplerConfig(kind="random"), SPACE, seed=1), SPACE, 4)[0]
        b = draw_batch(initial_state(SamplerConfig(kind="random"), SPACE, seed=2), SPACE, 4)[0]
        assert a != b


class TestMab:
    def test_unplayed_arms_score_infinite(self):
        scores = ucb_scores([1, 0], [1.0, 0.0], [0, 0], 1.0)
        assert math.isinf(scores[1])
        assert scores[0] == pytest.approx(1.0)

    def test_pending_draws_count_as_plays(self):
        state = initial_state(SamplerConfig(kind="mab", bins=3), GAP_ONLY)
        points, state = draw_batch(state, GAP_ONLY, 3)
        assert [p.arms for p in points] == [(0,), (1,), (2,)]
        assert state.pending == ((1, 1, 1),)
        for p in points:
            arm = p.arms[0]
            assert arm / 3 <= p.unit[0] <= (arm + 1) / 3

    def test_observe_updates_statistics(self):
        state = initial_state(SamplerConfig(kind="mab", bins=2), SPACE, campaign_id="c1")
        point, state = next_point(state, SPACE)
        state = observe(state, Feedback(point, rho=(-1.0, 1.0, 1.0, 1.0)))
        arm_c, arm_d = point.arms
        assert state.counts[0][arm_c] == 1
        assert state.counts[1][arm_d] == 1
        assert state.rewards[0][arm_c] == pytest.approx(0.25)
        assert state.pending == ((0, 0), (0, 0))

    def test_rewarded_arm_is_replayed(self):
        state = initial_state(SamplerConfig(kind="mab", bins=2, exploration=0.0), GAP_ONLY)
        points, state = draw_batch(state, GAP_ONLY, 2)
        state = observe(state, Feedback(points[0], rho=(1.0,)))
        state = observe(state, Feedback(points[1], rho=(-1.0,)))
        point, _ = next_point(state, GAP_ONLY)
        assert point.arms == (1,)

    def test_stale_feedback(self):
        state = initial_state(SamplerConfig(kind="mab"), SPACE, campaign_id="c1")
        point, state = next_point(state, SPACE)
        stale = SamplePoint(point.continuous, point.discrete, point.unit, point.arms, campaign_id="c0")
        with pytest.raises(StaleFeedback):
            observe(state, Feedback(stale, rho=(1.0,)))

    def test_passive_samplers_ignore_feedback(self):
        state = initial_state(SamplerConfig(kind="halton"), SPACE)
        point, state = next_point(state, SPACE)
        assert observe(state, Feedback(point, rho=(-1.0,))) == state


def test_empty_space_yields_empty_point():
    state = initial_state(SamplerConfig(kind="mab"), FeatureSpace(), campaign_id="c1")
    point, state = next_point(state, FeatureSpace())
    assert point == SamplePoint(campaign_id="c1")
    assert state.draws == 1


@settings(max_examples=100, deadline=None)
@given(
    kind=st.sampled_from(["random", "halton", "mab"]),
    seed=st.integers(0, 2**32),
    count=st.integers(1, 20),
    bins=st.integers(1, 6),
)
def test_points_stay_inside_the_space(kind, seed, count, bins):
    state = initial_state(SamplerConfig(kind=kind, bins=bins), SPACE, seed=seed)
    points, _ = draw_batch(state, SPACE, count)
    for p in points:
        assert 8.0 <= p.continuous[0] <= 30.0
        assert 0.0 <= p.unit[0] <= 1.0
        assert p.discrete[0] in (0, 1)


@pytest.mark.parametrize("best", range(5))
def test_mab_concentrates_on_the_violating_bin(best):
    state = initial_state(SamplerConfig(kind="mab", bins=5), GAP_ONLY, seed=3)
    pulls = []
    for _ in range(200):
        point, state = next_point(state, GAP_ONLY)
        pulls.append(point.arms[0])
        rho = (-1.0,) if point.arms[0] == best else (1.0,)
        state = observe(state, Feedback(point, rho=rho))
    assert pulls.count(best) / len(pulls) > 0.5
    assert state.counts[0][best] == pulls.count(best)
