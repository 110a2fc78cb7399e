"""
Feature-space samplers

Random and Halton samplers are passive. The multi-armed bandit sampler
runs one UCB1 bandit per dimension and learns from rollout feedback.
Sampler state is a plain value: every draw returns a new state, and
restoring a saved state continues the exact sequence.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from .config import SAMPLER_KINDS, SamplerConfig
from .exceptions import ConfigError, StaleFeedback
from .features import FeatureSpace, SamplePoint

logger = logging.getLogger(__name__)


def primes(count: int) -> List[int]:
    """First ``count`` primes"""
    found: List[int] = []
    candidate = 2
    while len(found) < count:
        if all(candidate % p for p in found if p * p <= candidate):
            found.append(candidate)
        candidate += 1
    return found


def halton_value(index: int, base: int) -> float:
    """Radical inverse of ``index`` in ``base``"""
    if index < 0:
        raise ValueError("halton index must be >= 0")
    result, f = 0.0, 1.0
    while index > 0:
        f /= base
        result += f * (index % base)
        index //= base
    return result


@dataclass(frozen=True)
class Feedback:
    """Outcome of one rollout, as seen by a sampler"""

    point: SamplePoint
    rho: Tuple[float, ...] = ()
    feasible: bool = True

    @property
    def reward(self) -> float:
        """Fraction of violated metrics; zero for infeasible samples"""
        if not self.feasible or not self.rho:
            return 0.0
        return sum(1 for r in self.rho if r < 0) / len(self.rho)


@dataclass(frozen=True)
class SamplerState:
    kind: str = "halton"
    seed: int = 0
    draws: int = 0
    halton_index: int = 0
    bins: int = 5
    exploration: float = 1.0
    campaign_id: str = ""
    # per-dimension bandit statistics, continuous dims first
    counts: Tuple[Tuple[int, ...], ...] = ()
    rewards: Tuple[Tuple[float, ...], ...] = ()
    pending: Tuple[Tuple[int, ...], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "draws": self.draws,
            "halton_index": self.halton_index,
            "bins": self.bins,
            "exploration": self.exploration,
            "campaign_id": self.campaign_id,
            "counts": [list(c) for c in self.counts],
            "rewards": [list(r) for r in self.rewards],
            "pending": [list(p) for p in self.pending],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SamplerState":
        return cls(
            kind=data["kind"],
            seed=int(data["seed"]),
            draws=int(data.get("draws", 0)),
            halton_index=int(data.get("halton_index", 0)),
            bins=int(data.get("bins", 5)),
            exploration=float(data.get("exploration", 1.0)),
            campaign_id=data.get("campaign_id", ""),
            counts=tuple(tuple(int(v) for v in c) for c in data.get("counts", [])),
            rewards=tuple(tuple(float(v) for v in r) for r in data.get("rewards", [])),
            pending=tuple(tuple(int(v) for v in p) for p in data.get("pending", [])),
        )


def initial_state(
    config: SamplerConfig, space: FeatureSpace, seed: int = 0, campaign_id: str = ""
) -> SamplerState:
    """Fresh sampler state for ``space``"""
    if config.kind not in SAMPLER_KINDS:
        raise ConfigError(f"unknown sampler '{config.kind}'")
    state = SamplerState(
        kind=config.kind,
        seed=int(seed),
        bins=int(config.bins),
        exploration=float(config.exploration),
        campaign_id=campaign_id,
    )
    if config.kind == "mab":
        arms = _arm_counts(state, space)
        state = replace(
            state,
            counts=tuple((0,) * n for n in arms),
            rewards=tuple((0.0,) * n for n in arms),
            pending=tuple((0,) * n for n in arms),
        )
    return state


def _arm_counts(state: SamplerState, space: FeatureSpace) -> List[int]:
    return [state.bins] * len(space.continuous) + [len(d.choices) for d in space.discrete]


def _rng(state: SamplerState) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([state.seed & 0xFFFFFFFFFFFFFFFF, state.draws]))


def _scale(space: FeatureSpace, unit: Sequence[float]) -> Tuple[float, ...]:
    out = []
    for dim, u in zip(space.continuous, unit):
        value = dim.lo + u * (dim.hi - dim.lo)
        out.append(min(max(value, dim.lo), dim.hi))
    return tuple(out)


def ucb_scores(
    counts: Sequence[int], rewards: Sequence[float], pending: Sequence[int], exploration: float
) -> List[float]:
    """UCB1 score per arm; unplayed arms score +inf and in-flight draws count as plays"""
    plays = [c + p for c, p in zip(counts, pending)]
    total = sum(plays)
    scores = []
    for n, n_eff, r in zip(counts, plays, rewards):
        if n_eff == 0:
            scores.append(math.inf)
            continue
        mean = r / n if n > 0 else 0.0
        scores.append(mean + exploration * math.sqrt(2.0 * math.log(max(total, 1)) / n_eff))
    return scores


def _best_arm(scores: Sequence[float]) -> int:
    best = 0
    for i, score in enumerate(scores):
        if score > scores[best]:
            best = i
    return best


def next_point(state: SamplerState, space: FeatureSpace) -> Tuple[SamplePoint, SamplerState]:
    """
    Draw the next point

    Returns:
        The point and the advanced state. An empty space yields the empty
        point.
    """
    n_cont = len(space.continuous)
    if space.is_empty:
        return SamplePoint(campaign_id=state.campaign_id), replace(state, draws=state.draws + 1)

    if state.kind == "random":
        rng = _rng(state)
        unit = tuple(float(u) for u in rng.random(n_cont))
        discrete = tuple(int(rng.integers(len(d.choices))) for d in space.discrete)
        point = SamplePoint(_scale(space, unit), discrete, unit, campaign_id=state.campaign_id)
        return point, replace(state, draws=state.draws + 1)

    if state.kind == "halton":
        index = state.halton_index + 1
        bases = primes(n_cont + len(space.discrete))
        values = [halton_value(index, b) for b in bases]
        unit = tuple(values[:n_cont])
        discrete = tuple(
            min(int(math.floor(v * len(d.choices))), len(d.choices) - 1)
            for v, d in zip(values[n_cont:], space.discrete)
        )
        point = SamplePoint(_scale(space, unit), discrete, unit, campaign_id=state.campaign_id)
        return point, replace(state, draws=state.draws + 1, halton_index=index)

    if state.kind == "mab":
        rng = _rng(state)
        arms = []
        pending = [list(p) for p in state.pending]
        for d in range(n_cont + len(space.discrete)):
            arm = _best_arm(ucb_scores(state.counts[d], state.rewards[d], state.pending[d], state.exploration))
            arms.append(arm)
            pending[d][arm] += 1
        unit = tuple(
            (arms[d] + float(rng.random())) / state.bins for d in range(n_cont)
        )
        unit = tuple(min(u, 1.0) for u in unit)
        point = SamplePoint(
            _scale(space, unit),
            tuple(arms[n_cont:]),
            unit,
            arms=tuple(arms),
            campaign_id=state.campaign_id,
        )
        new_state = replace(state, draws=state.draws + 1, pending=tuple(tuple(p) for p in pending))
        return point, new_state

    raise ConfigError(f"unknown sampler '{state.kind}'")


def observe(state: SamplerState, fb: Feedback) -> SamplerState:
    """
    Fold one rollout outcome into the sampler

    Raises:
        StaleFeedback: the point came from another campaign
    """
    if fb.point.campaign_id and state.campaign_id and fb.point.campaign_id != state.campaign_id:
        raise StaleFeedback(
            f"feedback from campaign {fb.point.campaign_id} given to campaign {state.campaign_id}"
        )
    if state.kind != "mab" or not fb.point.arms:
        return state
    reward = fb.reward
    counts = [list(c) for c in state.counts]
    rewards = [list(r) for r in state.rewards]
    pending = [list(p) for p in state.pending]
    for d, arm in enumerate(fb.point.arms):
        counts[d][arm] += 1
        rewards[d][arm] += reward
        pending[d][arm] = max(0, pending[d][arm] - 1)
    logger.debug(f"MAB observed reward {reward:.3f} for arms {fb.point.arms}")
    return replace(
        state,
        counts=tuple(tuple(c) for c in counts),
        rewards=tuple(tuple(r) for r in rewards),
        pending=tuple(tuple(p) for p in pending),
    )


def draw_batch(state: SamplerState, space: FeatureSpace, size: int) -> Tuple[List[SamplePoint], SamplerState]:
    points = []
    for _ in range(size):
        point, state = next_point(state, space)
        points.append(point)
    return points, state
