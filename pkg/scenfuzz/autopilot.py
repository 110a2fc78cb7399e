"""
Baseline autopilot used as the builtin system under test
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

from .config import AutopilotConfig, SimulationConfig
from .maps import MapModel, Polyline
from .simulator import pure_pursuit
from .state import Action, AgentState, WorldState

logger = logging.getLogger(__name__)

# Lateral half-band of the route corridor used for leader detection
CORRIDOR = 2.0


class Autopilot:
    """
    Route-following controller

    Steering is pure pursuit along the route centerline. The speed command
    is the minimum of a cruise law, a constant-time-gap law toward the
    nearest vehicle ahead in the route corridor, and a stop-line law when
    another vehicle occupies an intersection ahead. Pedestrians are ignored
    unless ``yield_to_pedestrians`` is set.
    """

    def __init__(
        self,
        map_model: MapModel,
        route: Sequence[str],
        config: Optional[AutopilotConfig] = None,
        simulation: Optional[SimulationConfig] = None,
        cruise_speed: Optional[float] = None,
    ):
        self.map = map_model
        self.route = tuple(route)
        self.config = config or AutopilotConfig()
        self.simulation = simulation or SimulationConfig()
        self.cruise_speed = self.config.cruise_speed if cruise_speed is None else cruise_speed
        self.path: Polyline = map_model.path(self.route)
        self.stop_lines = self._stop_lines()
        self.off_route_logged = False

    def _stop_lines(self) -> List[Tuple[float, str]]:
        """Path position of every stop line on the route, with its intersection"""
        offsets, total = {}, 0.0
        for lane_id in self.route:
            offsets[lane_id] = total
            total += self.map.lanes[lane_id].length
        lines = []
        for inter in self.map.intersections.values():
            for lane_id, s in inter.stop_lines:
                if lane_id in offsets:
                    lines.append((offsets[lane_id] + s, inter.id))
        return sorted(lines)

    def off_route(self, ego: AgentState) -> bool:
        for lane_id in self.route:
            lane = self.map.lanes[lane_id]
            if lane.centerline.distance(ego.x, ego.y) <= lane.width / 2.0:
                return False
        nearest, _ = self.map.nearest_lane(ego.x, ego.y)
        return nearest not in self.route

    def leader_gap(self, ego: AgentState, s_ego: float, world: WorldState) -> Optional[Tuple[AgentState, float]]:
        best = None
        for other in world.others("ego"):
            if other.kind == "pedestrian" and not self.config.yield_to_pedestrians:
                continue
            s_other, lateral, _ = self.path.project(other.x, other.y)
            gap = s_other - s_ego
            if gap <= 0 or abs(lateral) > CORRIDOR:
                continue
            if best is None or gap < best[1]:
                best = (other, gap)
        return best

    def intersection_busy(self, intersection_id: str, world: WorldState) -> bool:
        return any(
            other.is_vehicle and self.map.in_intersection(intersection_id, other.x, other.y)
            for other in world.others("ego")
        )

    def speed_command(self, ego: AgentState, world: WorldState) -> Tuple[float, str]:
        cfg = self.config
        s_ego, _, _ = self.path.project(ego.x, ego.y)
        accel, label = cfg.k_speed * (self.cruise_speed - ego.speed), "cruise"

        found = self.leader_gap(ego, s_ego, world)
        if found is not None:
            leader, gap = found
            gap_law = cfg.k_rel_speed * (leader.speed - ego.speed) + cfg.k_gap * (
                gap - cfg.standstill_gap - cfg.time_gap * ego.speed
            )
            if gap_law < accel:
                accel, label = gap_law, "follow"

        if cfg.stop_at_stop_lines:
            for s_stop, inter_id in self.stop_lines:
                if s_stop < s_ego:
                    continue
                if self.map.in_intersection(inter_id, ego.x, ego.y):
                    continue
                if not self.intersection_busy(inter_id, world):
                    continue
                distance = s_stop - s_ego
                stop_law = cfg.k_rel_speed * (0.0 - ego.speed) + cfg.k_gap * (
                    distance - cfg.stop_line_gap - cfg.time_gap * ego.speed
                )
                if stop_law < accel:
                    accel, label = stop_law, "stop_line"
                break
        return accel, label

    def act(self, world: WorldState) -> Action:
        ego = world.ego
        if self.off_route(ego):
            if not self.off_route_logged:
                logger.warning(f"Ego left its route at t={world.time:.2f}; braking")
                self.off_route_logged = True
            return Action.brake(-self.simulation.accel_min, label="off_route")
        accel, label = self.speed_command(ego, world)
        yaw_rate = pure_pursuit(
            ego, self.path, 0.0, self.config.lookahead_min, self.config.lookahead_gain
        )
        yaw_rate = min(max(yaw_rate, -self.simulation.max_yaw_rate), self.simulation.max_yaw_rate)
        if not math.isfinite(accel):
            accel = self.simulation.accel_min
        return Action(accel=accel, path=self.route, yaw_rate=yaw_rate, label=label)
