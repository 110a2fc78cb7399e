"""
Pedestrian behaviors and the kind-agnostic Wait
"""

import math
from typing import Tuple

import numpy as np

from ..state import Action, AgentState, WorldState
from .base import Arg, Behavior

# Positional tolerance for "waypoint reached"
ARRIVED = 1e-6


class CrossRoadBehavior(Behavior):
    """
    Wait ``wait_before`` s, walk ``distance`` m along the initial heading and
    pause ``wait_inside`` s at the midpoint on the way
    """

    name = "CrossRoad"
    kinds = ("pedestrian",)
    signature = (
        Arg("speed", default=1.4),
        Arg("wait_before", default=0.0),
        Arg("wait_inside", default=0.0),
        Arg("distance", default=10.0),
    )

    def waypoints(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        x0, y0, heading = self.context.start
        d = self.args["distance"]
        ux, uy = math.cos(heading), math.sin(heading)
        return (x0 + 0.5 * d * ux, y0 + 0.5 * d * uy), (x0 + d * ux, y0 + d * uy)

    def walk(self, target: Tuple[float, float]) -> Action:
        return Action(waypoint=target, speed=self.args["speed"], label="walk")

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        now = world.time
        if self.elapsed(world) < self.args["wait_before"] - 1e-9:
            return Action.wait()
        middle, end = self.waypoints()
        phase = self.memory.setdefault("phase", "to_middle")

        if phase == "to_middle":
            if math.hypot(agent.x - middle[0], agent.y - middle[1]) > ARRIVED:
                return self.walk(middle)
            phase = self.memory["phase"] = "pause"
            self.memory["pause_start"] = now

        if phase == "pause":
            if now < self.memory["pause_start"] + self.args["wait_inside"] - 1e-9:
                return Action.wait()
            phase = self.memory["phase"] = "to_end"

        if phase == "to_end":
            if math.hypot(agent.x - end[0], agent.y - end[1]) > ARRIVED:
                return self.walk(end)
            self.memory["phase"] = "done"

        return Action.wait(label="done")


class WaitBehavior(Behavior):
    """Stand still for ``duration`` s, then move at ``speed``"""

    name = "Wait"
    kinds = ("car", "bus", "pedestrian")
    signature = (
        Arg("duration", default=0.0),
        Arg("speed", default=0.0),
    )

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        speed = self.args["speed"]
        if self.elapsed(world) < self.args["duration"] - 1e-9 or speed <= 0:
            return Action.wait()
        if agent.kind == "pedestrian":
            target = (agent.x + 100.0 * math.cos(agent.heading), agent.y + 100.0 * math.sin(agent.heading))
            return Action(waypoint=target, speed=speed, label="walk")
        return self.follow(self.cruise_accel(agent, speed))
