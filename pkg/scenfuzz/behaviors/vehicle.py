"""
Lane-bound vehicle behaviors
"""

from typing import Optional, Tuple

import numpy as np

from ..state import Action, AgentState, WorldState
from .base import Arg, Behavior, smoothstep

# Lateral half-band used to decide that another vehicle shares our lane
LEADER_BAND = 2.0


class FollowLaneBehavior(Behavior):
    """Track the lane chain at a target speed"""

    name = "FollowLane"
    signature = (
        Arg("speed", default=10.0),
        Arg("via", type="str", default=""),
        Arg("speed_noise", default=0.0),
    )

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        target = self.args["speed"]
        noise = self.args["speed_noise"]
        if noise > 0:
            target = max(0.0, target + float(rng.normal(0.0, noise)))
        return self.follow(self.cruise_accel(agent, target))


class FollowVehicleBehavior(Behavior):
    """
    Constant-time-gap car following

    a = k_v (v_lead - v) + k_s (gap - v T_gap), never above the cruise law
    toward ``speed``. Without a leader the agent simply cruises.
    """

    name = "FollowVehicle"
    signature = (
        Arg("speed", default=10.0),
        Arg("leader", type="str", default=""),
        Arg("time_gap", default=1.5),
        Arg("k_v", default=0.5),
        Arg("k_s", default=0.2),
    )

    def find_leader(self, agent: AgentState, world: WorldState) -> Optional[Tuple[AgentState, float]]:
        path = self.context.path
        if path is None:
            return None
        s_self, _, _ = path.project(agent.x, agent.y)
        name = self.args["leader"]
        if name:
            if not world.has_agent(name) or not world.agent(name).alive:
                return None
            other = world.agent(name)
            s_other, _, _ = path.project(other.x, other.y)
            return other, s_other - s_self
        best = None
        for other in world.others(agent.name):
            if not other.is_vehicle:
                continue
            s_other, lateral, _ = path.project(other.x, other.y)
            gap = s_other - s_self
            if gap <= 0 or abs(lateral) > LEADER_BAND:
                continue
            if best is None or gap < best[1]:
                best = (other, gap)
        return best

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        accel = self.cruise_accel(agent, self.args["speed"])
        found = self.find_leader(agent, world)
        if found is not None:
            leader, gap = found
            gap_law = self.args["k_v"] * (leader.speed - agent.speed) + self.args["k_s"] * (
                gap - agent.speed * self.args["time_gap"]
            )
            accel = min(accel, gap_law)
        return self.follow(accel)


class _LateralManeuver(Behavior):
    """Shared lateral shift toward another lane's centerline"""

    label = "lane_change"

    def target_lateral(self, agent: AgentState) -> float:
        target = self.context.map.lane(self.args["target_lane"]).centerline
        ts, _, _ = target.project(agent.x, agent.y)
        px, py, _ = target.point_at(ts)
        path = self.context.path
        if path is None:
            return 0.0
        return path.project(px, py)[1]

    def shift(self, agent: AgentState, world: WorldState, speed: float) -> Action:
        if "start" not in self.memory:
            self.memory["start"] = world.time
            self.memory["from"] = self.path_position(agent)[1]
            self.memory["to"] = self.target_lateral(agent)
            self.logger.debug(f"{agent.name} starts {self.name} at t={world.time:.2f}")
        duration = self.args["duration"]
        u = 1.0 if duration <= 0 else (world.time - self.memory["start"]) / duration
        lateral = self.memory["from"] + (self.memory["to"] - self.memory["from"]) * smoothstep(u)
        return self.follow(self.cruise_accel(agent, speed), label=self.label, lateral=lateral)


class LaneChangeBehavior(_LateralManeuver):
    """Cruise, then shift into ``target_lane`` once time and ego-distance triggers hold"""

    name = "LaneChange"
    signature = (
        Arg("target_lane", type="str"),
        Arg("speed", default=10.0),
        Arg("trigger_time", default=0.0),
        Arg("trigger_distance", default=0.0),
        Arg("duration", default=3.0),
    )

    def triggered(self, agent: AgentState, world: WorldState) -> bool:
        if "start" in self.memory:
            return True
        if self.elapsed(world) < self.args["trigger_time"] - 1e-9:
            return False
        reach = self.args["trigger_distance"]
        return reach <= 0 or self.ego_distance(agent, world) <= reach

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        if not self.triggered(agent, world):
            return self.follow(self.cruise_accel(agent, self.args["speed"]))
        return self.shift(agent, world, self.args["speed"])


class PullInBehavior(_LateralManeuver):
    """Stay parked until the ego comes within ``trigger_distance``, then pull into ``target_lane``"""

    name = "PullIn"
    label = "pull_in"
    signature = (
        Arg("target_lane", type="str", default=None),
        Arg("trigger_distance", default=20.0),
        Arg("speed", default=5.0),
        Arg("duration", default=3.0),
    )

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        if "start" not in self.memory and self.ego_distance(agent, world) > self.args["trigger_distance"]:
            return Action.wait()
        return self.shift(agent, world, self.args["speed"])


class BrakeBehavior(Behavior):
    """Cruise at ``speed``; brake at ``decel`` from ``delay`` s after the ego comes within range"""

    name = "Brake"
    signature = (
        Arg("speed", default=10.0),
        Arg("decel", default=4.0),
        Arg("trigger_distance", default=20.0),
        Arg("delay", default=0.0),
    )

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        if "triggered" not in self.memory and self.ego_distance(agent, world) <= self.args["trigger_distance"]:
            self.memory["triggered"] = world.time
            self.logger.debug(f"{agent.name} brake triggered at t={world.time:.2f}")
        fired = self.memory.get("triggered")
        if fired is not None and world.time >= fired + self.args["delay"] - 1e-9:
            return Action.brake(
                self.args["decel"], path=self.context.lanes, lateral=self.context.lateral
            )
        return self.follow(self.cruise_accel(agent, self.args["speed"]))


class ParkBehavior(Behavior):
    name = "Park"
    signature = ()

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        return Action.wait(label="park")
