"""
Safety monitors

Each monitor maps a completed trace to a robustness value rho, the signed
margin of its defining inequality: negative means violated. Vacuous or
safe contributions are capped so every value stays finite.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import MonitorConfig
from .exceptions import UnknownLane
from .maps import MapModel
from .state import AgentState, WorldState

logger = logging.getLogger(__name__)

METRICS = ("progress", "distance", "ttc", "lane")

# |v|^2 below this is relative rest
REST_EPS = 1e-12


@dataclass(frozen=True)
class RhoVector:
    """Robustness per metric, in the fixed order of METRICS"""

    progress: float
    distance: float
    ttc: float
    lane: float

    def values(self) -> Tuple[float, ...]:
        return tuple(getattr(self, m) for m in METRICS)

    def flags(self) -> Tuple[bool, ...]:
        return tuple(v < 0 for v in self.values())

    @property
    def violated(self) -> bool:
        return any(self.flags())

    @property
    def violation_count(self) -> int:
        return sum(self.flags())

    def to_dict(self) -> Dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RhoVector":
        return cls(**{m: float(data[m]) for m in METRICS})


class TtcCase(str, Enum):
    NO_REAL_ROOTS = "no_real_roots"
    RELATIVE_REST_SAFE = "relative_rest_safe"
    RELATIVE_REST_VIOLATING = "relative_rest_violating"
    ROOTS = "roots"


@dataclass(frozen=True)
class TtcRoots:
    case: TtcCase
    t1: Optional[float] = None
    t2: Optional[float] = None


def ttc_roots(p: Sequence[float], v: Sequence[float], r: float) -> TtcRoots:
    """
    Times at which ||p + v t|| = r

    Solves (v.v) t^2 + 2 (p.v) t + (p.p - r^2) = 0 with the numerically
    stable form of the quadratic formula.
    """
    if not r > 0:
        raise ValueError("threshold must be > 0")
    px, py = float(p[0]), float(p[1])
    vx, vy = float(v[0]), float(v[1])
    a = vx * vx + vy * vy
    c = px * px + py * py - r * r
    if a < REST_EPS:
        if c <= 0:
            return TtcRoots(TtcCase.RELATIVE_REST_VIOLATING)
        return TtcRoots(TtcCase.RELATIVE_REST_SAFE)
    b = 2.0 * (px * vx + py * vy)
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return TtcRoots(TtcCase.NO_REAL_ROOTS)
    root = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(root, b))
    if q == 0.0:
        return TtcRoots(TtcCase.ROOTS, 0.0, 0.0)
    t1, t2 = sorted((q / a, c / q))
    return TtcRoots(TtcCase.ROOTS, t1, t2)


def _velocity(agent: AgentState) -> Tuple[float, float]:
    return agent.speed * math.cos(agent.heading), agent.speed * math.sin(agent.heading)


def _counterparts(world: WorldState, include_pedestrians: bool) -> List[AgentState]:
    return [
        a for a in world.others("ego") if a.is_vehicle or (include_pedestrians and a.kind == "pedestrian")
    ]


def metric_distance(steps: Sequence[WorldState], config: Optional[MonitorConfig] = None) -> float:
    config = config or MonitorConfig()
    rho = config.cap
    for world in steps:
        ego = world.ego
        for other in _counterparts(world, config.include_pedestrians):
            rho = min(rho, math.hypot(other.x - ego.x, other.y - ego.y) - config.distance)
    return rho


def ttc_margin(roots: TtcRoots, threshold: float, cap: float) -> float:
    """Margin of one ego/other pair at one step"""
    if roots.case == TtcCase.RELATIVE_REST_VIOLATING:
        return -threshold
    if roots.case != TtcCase.ROOTS or roots.t2 <= 0:
        return cap
    return min(cap, roots.t1 - threshold)


def metric_ttc(steps: Sequence[WorldState], config: Optional[MonitorConfig] = None) -> float:
    config = config or MonitorConfig()
    rho = config.cap
    for world in steps:
        ego = world.ego
        evx, evy = _velocity(ego)
        for other in _counterparts(world, config.include_pedestrians):
            ovx, ovy = _velocity(other)
            roots = ttc_roots((other.x - ego.x, other.y - ego.y), (ovx - evx, ovy - evy), config.distance)
            rho = min(rho, ttc_margin(roots, config.ttc, config.cap))
    return rho


def metric_progress(steps: Sequence[WorldState], config: Optional[MonitorConfig] = None) -> float:
    config = config or MonitorConfig()
    if len(steps) < 2:
        return -config.progress
    first, last = steps[0].ego, steps[-1].ego
    return math.hypot(last.x - first.x, last.y - first.y) - config.progress


def metric_lane(
    steps: Sequence[WorldState], map_model: MapModel, config: Optional[MonitorConfig] = None
) -> float:
    """
    Raises:
        UnknownLane: a step records no ego lane or one missing from the map
    """
    config = config or MonitorConfig()
    if not steps:
        return config.lane
    deviations = []
    for world in steps:
        if world.ego_lane is None:
            raise UnknownLane(f"no ego lane recorded at t={world.time:.2f}")
        lane = map_model.lane(world.ego_lane)
        deviations.append(lane.centerline.distance(world.ego.x, world.ego.y))
    return min(config.cap, config.lane - float(np.mean(deviations)))


def evaluate(trace, map_model: MapModel, config: Optional[MonitorConfig] = None) -> RhoVector:
    """All four metrics of a trace (or a plain sequence of world states)"""
    steps = getattr(trace, "steps", trace)
    config = config or MonitorConfig()
    return RhoVector(
        progress=min(config.cap, metric_progress(steps, config)),
        distance=metric_distance(steps, config),
        ttc=metric_ttc(steps, config),
        lane=metric_lane(steps, map_model, config),
    )


def count_violations(vectors: Iterable[RhoVector]) -> Dict[str, int]:
    counts = {m: 0 for m in METRICS}
    for rho in vectors:
        for metric, flag in zip(METRICS, rho.flags()):
            counts[metric] += int(flag)
    return counts
