"""
Fixed-step 2-D kinematic simulation

Vehicles follow a unicycle model steered by pure pursuit along a lane path
(or by an explicit yaw rate); pedestrians walk straight toward waypoints.
``run_rollout`` drives the SUT and the scripted agents through one
concrete scene, including subscenario composition.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .behaviors import Behavior, BehaviorContext, create_behavior
from .config import SimulationConfig
from .exceptions import ExpressionError, SpawnCollision, SutTimeout
from .features import AgentGroup, ConcreteAgent, ConcreteScene, evaluate
from .helpers import dumps_line
from .maps import MapModel, Polyline
from .state import Action, AgentState, WorldState

logger = logging.getLogger(__name__)

LOOKAHEAD_MIN = 4.0
LOOKAHEAD_GAIN = 0.3


class Termination(str, Enum):
    TIME_LIMIT = "time_limit"
    PREDICATE = "predicate"
    SUT_DISCONNECT = "sut_disconnect"


@dataclass
class Trace:
    """Every world state of one rollout, at times i * dt"""

    dt: float
    steps: List[WorldState] = field(default_factory=list)
    termination: Termination = Termination.TIME_LIMIT
    events: List[Tuple[float, str, str]] = field(default_factory=list)

    @property
    def duration(self) -> float:
        return self.steps[-1].time if self.steps else 0.0

    def ego_positions(self) -> np.ndarray:
        return np.array([[w.ego.x, w.ego.y] for w in self.steps])

    def to_lines(self) -> List[str]:
        return [dumps_line(w.to_dict()) for w in self.steps]

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")

    @classmethod
    def read(
        cls, path: Union[str, Path], dt: float, termination: Union[str, Termination] = Termination.TIME_LIMIT
    ) -> "Trace":
        steps = [
            WorldState.from_dict(json.loads(line))
            for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        return cls(dt=dt, steps=steps, termination=Termination(termination))


def pure_pursuit(
    agent: AgentState,
    path: Polyline,
    lateral: float = 0.0,
    lookahead_min: float = LOOKAHEAD_MIN,
    lookahead_gain: float = LOOKAHEAD_GAIN,
) -> float:
    """Yaw rate that steers ``agent`` toward ``path`` offset by ``lateral``"""
    s, _, _ = path.project(agent.x, agent.y)
    lookahead = lookahead_min + lookahead_gain * agent.speed
    tx, ty, _ = path.point_at(s + lookahead, lateral)
    alpha = math.atan2(ty - agent.y, tx - agent.x) - agent.heading
    alpha = math.atan2(math.sin(alpha), math.cos(alpha))
    return 2.0 * agent.speed * math.sin(alpha) / lookahead


def _locate(map_model: MapModel, agent: AgentState, x: float, y: float) -> Tuple[Optional[str], Optional[float]]:
    """Lane containing (x, y), preferring the agent's current lane and its successors"""
    candidates: List[str] = []
    if agent.lane is not None and agent.lane in map_model.lanes:
        candidates.append(agent.lane)
        candidates.extend(map_model.lanes[agent.lane].successors)
    for lane_id in candidates:
        lane = map_model.lanes[lane_id]
        s, _, dist = lane.centerline.project(x, y)
        if dist <= lane.width / 2.0 and 0.0 <= s <= lane.length:
            return lane_id, s
    lane_id, dist = map_model.nearest_lane(x, y)
    if lane_id is not None and dist <= map_model.lanes[lane_id].width / 2.0:
        return lane_id, map_model.lanes[lane_id].centerline.project(x, y)[0]
    return None, None


def _step_agent(
    agent: AgentState, action: Action, dt: float, map_model: MapModel, config: SimulationConfig
) -> AgentState:
    if agent.kind == "pedestrian":
        if action.waypoint is None or not action.speed:
            return agent.moved(speed=0.0)
        speed = min(max(action.speed, 0.0), config.pedestrian_v_max)
        dx, dy = action.waypoint[0] - agent.x, action.waypoint[1] - agent.y
        remaining = math.hypot(dx, dy)
        if remaining <= 0.0:
            return agent.moved(speed=0.0)
        step = min(speed * dt, remaining)
        x = agent.x + step * dx / remaining
        y = agent.y + step * dy / remaining
        lane, s = _locate(map_model, agent, x, y)
        return agent.moved(x=x, y=y, heading=math.atan2(dy, dx), speed=step / dt, lane=lane, s=s)

    accel = min(max(action.accel, config.accel_min), config.accel_max)
    speed = min(max(agent.speed + accel * dt, 0.0), config.v_max)
    if action.yaw_rate is not None:
        yaw_rate = action.yaw_rate
    elif action.path:
        yaw_rate = pure_pursuit(agent, map_model.path(action.path), action.lateral)
    else:
        yaw_rate = 0.0
    yaw_rate = min(max(yaw_rate, -config.max_yaw_rate), config.max_yaw_rate)
    travel = 0.5 * (agent.speed + speed) * dt
    mid = agent.heading + 0.5 * yaw_rate * dt
    heading = agent.heading + yaw_rate * dt
    heading = math.atan2(math.sin(heading), math.cos(heading))
    x = agent.x + travel * math.cos(mid)
    y = agent.y + travel * math.sin(mid)
    lane, s = _locate(map_model, agent, x, y)
    return agent.moved(x=x, y=y, heading=heading, speed=speed, lane=lane, s=s)


def step_world(
    world: WorldState,
    actions: Mapping[str, Action],
    dt: float,
    map_model: MapModel,
    config: Optional[SimulationConfig] = None,
    route: Sequence[str] = (),
    time: Optional[float] = None,
) -> WorldState:
    """
    Advance every alive agent by one step

    ``time`` overrides the accumulated clock so callers can keep times at
    exact multiples of ``dt``.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    config = config or SimulationConfig()
    agents = []
    for agent in world.agents:
        if not agent.alive:
            agents.append(agent)
            continue
        agents.append(_step_agent(agent, actions.get(agent.name, Action.hold()), dt, map_model, config))
    new_time = world.time + dt if time is None else time
    new = WorldState(time=new_time, agents=tuple(agents))
    ego_lane = _ego_lane(new, map_model, route) if new.has_agent("ego") else None
    new = WorldState(time=new_time, agents=new.agents, ego_lane=ego_lane)
    for agent in new.agents:
        assert math.isfinite(agent.x) and math.isfinite(agent.y) and math.isfinite(agent.speed)
    return new


def _ego_lane(world: WorldState, map_model: MapModel, route: Sequence[str]) -> Optional[str]:
    """Route lane whose centerline is nearest the ego"""
    ego = world.ego
    if route:
        return map_model.nearest_lane(ego.x, ego.y, candidates=list(route))[0]
    return ego.lane or map_model.nearest_lane(ego.x, ego.y)[0]


class _Rollout:
    """Mutable bookkeeping of one rollout"""

    def __init__(
        self,
        scene: ConcreteScene,
        map_model: MapModel,
        dt: float,
        config: SimulationConfig,
        seed: int,
    ):
        self.scene = scene
        self.map = map_model
        self.dt = dt
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.spawned: Dict[str, ConcreteAgent] = {a.name: a for a in scene.agents}
        self.behaviors: Dict[str, Behavior] = {}
        self.params = dict(scene.params)
        self.events: List[Tuple[float, str, str]] = []
        self._collision_logged: set = set()

    def context(self, agent: ConcreteAgent) -> BehaviorContext:
        lanes: Tuple[str, ...] = ()
        if agent.kind != "pedestrian" and agent.anchor_lane is not None:
            via = agent.behavior.get("via") or None
            lanes = self.map.successor_chain(agent.anchor_lane, via=via)
        return BehaviorContext(
            map=self.map,
            dt=self.dt,
            lanes=lanes,
            lateral=agent.lateral,
            start=(agent.x, agent.y, agent.heading),
            pedestrian_v_max=self.config.pedestrian_v_max,
        )

    def fresh_behavior(self, agent: ConcreteAgent) -> None:
        self.behaviors[agent.name] = create_behavior(agent.behavior, self.context(agent))

    def initial_state(self, agent: ConcreteAgent, alive: bool) -> AgentState:
        return AgentState(
            name=agent.name,
            kind=agent.kind,
            x=agent.x,
            y=agent.y,
            heading=agent.heading,
            speed=agent.speed,
            lane=agent.lane,
            s=agent.s,
            alive=alive,
        )

    def group_active(self, group: Optional[AgentGroup], world: WorldState) -> bool:
        if group is None or group.mode == "parallel":
            return True
        if group.mode == "sequential":
            return group.start - 1e-9 <= world.time < group.end - 1e-9
        if not world.has_agent(group.trigger_agent):
            return False
        trigger = world.agent(group.trigger_agent)
        return trigger.alive and self.map.in_region(group.trigger, trigger.x, trigger.y)

    def check_spawn(self, group: AgentGroup, world: WorldState) -> None:
        """
        Raises:
            SpawnCollision: a group agent would start within the spawn clearance of an alive agent
        """
        members = [a for a in self.scene.agents if a.group == group.name]
        for member in members:
            for other in world.agents:
                if not other.alive or other.name in {m.name for m in members}:
                    continue
                if math.hypot(member.x - other.x, member.y - other.y) < self.config.spawn_clearance:
                    raise SpawnCollision(
                        f"{member.name} would spawn within {self.config.spawn_clearance} m of {other.name}"
                    )

    def compose(self, world: WorldState) -> WorldState:
        """Spawn and despawn subscenario agents for the current time"""
        agents = list(world.agents)
        for group in self.scene.groups:
            if group.mode == "parallel":
                continue
            indices = [i for i, a in enumerate(agents) if self.spawned[a.name].group == group.name]
            if not indices:
                continue
            alive = agents[indices[0]].alive
            active = self.group_active(group, world)
            if active and not alive:
                try:
                    self.check_spawn(group, world)
                except SpawnCollision as e:
                    if group.name not in self._collision_logged:
                        logger.warning(f"Skipping spawn of {group.name}: {e}")
                        self._collision_logged.add(group.name)
                    continue
                for i in indices:
                    concrete = self.spawned[agents[i].name]
                    agents[i] = self.initial_state(concrete, True)
                    self.fresh_behavior(concrete)
                self.events.append((world.time, group.name, "spawn"))
                logger.debug(f"Spawned {group.name} at t={world.time:.2f}")
            elif alive and not active:
                for i in indices:
                    agents[i] = agents[i].moved(alive=False)
                self.events.append((world.time, group.name, "despawn"))
                self._collision_logged.discard(group.name)
                logger.debug(f"Despawned {group.name} at t={world.time:.2f}")
        return WorldState(time=world.time, agents=tuple(agents), ego_lane=world.ego_lane)

    def predicate_holds(self, world: WorldState) -> bool:
        if self.scene.predicate is None:
            return False

        def lookup(name: str) -> Any:
            if name == "time":
                return world.time
            if name in self.params:
                return self.params[name]
            if world.has_agent(name):
                return world.agent(name)
            raise ExpressionError(f"'{name}' is not defined")

        try:
            return bool(evaluate(self.scene.predicate, lookup))
        except ExpressionError as e:
            logger.debug(f"Termination predicate not evaluable at t={world.time:.2f}: {e}")
            return False


def run_rollout(
    scene: ConcreteScene,
    sut,
    map_model: MapModel,
    dt: float,
    horizon: float,
    config: Optional[SimulationConfig] = None,
    seed: int = 0,
) -> Trace:
    """
    Simulate ``scene`` with the SUT driving the ego

    The loop runs until the horizon, the scene's ``terminate after`` time,
    its ``terminate when`` predicate, or the SUT missing a deadline. A
    missed deadline records the step with a full-brake ego action and ends
    the rollout as ``sut_disconnect``.
    """
    if dt <= 0 or horizon < dt:
        raise ValueError("need dt > 0 and horizon >= dt")
    config = config or SimulationConfig()
    rollout = _Rollout(scene, map_model, dt, config, seed)
    limit = horizon if scene.max_time is None else min(horizon, scene.max_time)
    n_steps = max(1, int(round(limit / dt)))

    states = []
    initial = WorldState(
        time=0.0, agents=tuple(rollout.initial_state(a, a.group is None) for a in scene.agents)
    )
    for agent in scene.agents:
        group = scene.group(agent.group)
        alive = agent.group is None or group is None or rollout.group_active(group, initial)
        states.append(rollout.initial_state(agent, alive))
        if agent.name != "ego" and alive:
            rollout.fresh_behavior(agent)
    world = WorldState(time=0.0, agents=tuple(states))
    world = WorldState(time=0.0, agents=world.agents, ego_lane=_ego_lane(world, map_model, scene.route))
    for group in scene.groups:
        members = [a for a in world.agents if rollout.spawned[a.name].group == group.name]
        if group.mode != "parallel" and any(a.alive for a in members):
            rollout.events.append((0.0, group.name, "spawn"))

    trace = Trace(dt=dt, steps=[world])
    for i in range(1, n_steps + 1):
        disconnected = False
        try:
            ego_action = sut.act(world)
        except SutTimeout as e:
            logger.warning(f"SUT missed its deadline at t={world.time:.2f}: {e}")
            ego_action = Action.brake(-config.accel_min, label="sut_timeout", path=scene.route)
            disconnected = True
        actions = {"ego": ego_action}
        for agent in world.agents:
            if agent.name == "ego" or not agent.alive:
                continue
            actions[agent.name] = rollout.behaviors[agent.name].action(agent, world, rollout.rng)
        world = step_world(world, actions, dt, map_model, config, scene.route, time=i * dt)
        world = rollout.compose(world)
        trace.steps.append(world)
        if disconnected:
            trace.termination = Termination.SUT_DISCONNECT
            break
        if rollout.predicate_holds(world):
            trace.termination = Termination.PREDICATE
            break
    trace.events = rollout.events
    logger.debug(
        f"Rollout of {scene.name} ended at t={trace.duration:.2f} ({trace.termination.value}, {len(trace.steps)} steps)"
    )
    return trace
