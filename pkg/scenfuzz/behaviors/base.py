"""
Base class and signature model for built-in agent behaviors
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, ClassVar, Dict, Mapping, Optional, Tuple

import numpy as np

from ..exceptions import InfeasibleSample
from ..maps import MapModel, Polyline
from ..state import Action, AgentState, WorldState


class _Required:
    def __repr__(self):
        return "<required>"


REQUIRED = _Required()

# Longitudinal speed gain shared by the cruise laws of scripted vehicles
K_CRUISE = 1.0


@dataclass(frozen=True)
class Arg:
    """One keyword argument of a behavior"""

    name: str
    type: str = "num"  # "num" or "str"
    default: Any = REQUIRED
    nonnegative: bool = True

    @property
    def required(self) -> bool:
        return self.default is REQUIRED


@dataclass(frozen=True)
class BehaviorSpec:
    """A behavior name with fully bound concrete arguments"""

    name: str
    args: Tuple[Tuple[str, Any], ...] = ()

    def get(self, key: str, default: Any = None) -> Any:
        for name, value in self.args:
            if name == key:
                return value
        return default

    def as_dict(self) -> Dict[str, Any]:
        return dict(self.args)


@dataclass
class BehaviorContext:
    """Static facts a behavior needs about its agent and the world"""

    map: MapModel
    dt: float
    lanes: Tuple[str, ...] = ()
    lateral: float = 0.0
    start: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    pedestrian_v_max: float = 3.0
    _path: Optional[Polyline] = field(default=None, repr=False)

    @property
    def path(self) -> Optional[Polyline]:
        if self._path is None and self.lanes:
            self._path = self.map.path(self.lanes)
        return self._path


class Behavior:
    """
    Scripted agent behavior

    Subclasses declare ``signature`` and implement ``action``. One instance
    drives one agent for one rollout and may keep state in ``memory``.
    """

    name: ClassVar[str] = ""
    kinds: ClassVar[Tuple[str, ...]] = ("car", "bus")
    signature: ClassVar[Tuple[Arg, ...]] = ()

    def __init__(self, spec: BehaviorSpec, context: BehaviorContext):
        self.spec = spec
        self.args = spec.as_dict()
        self.context = context
        self.memory: Dict[str, Any] = {}
        self.logger = logging.getLogger(f"scenfuzz.behaviors.{self.name}")

    @classmethod
    def arg(cls, name: str) -> Optional[Arg]:
        for arg in cls.signature:
            if arg.name == name:
                return arg
        return None

    @classmethod
    def bind(cls, values: Mapping[str, Any], defaults: Optional[Mapping[str, Any]] = None) -> BehaviorSpec:
        """
        Fill defaults and check concrete argument values

        ``defaults`` supplies per-agent defaults for arguments whose
        signature default is ``None`` (for example a placement lane).

        Raises:
            InfeasibleSample: a value is negative where it must not be, or
                a required argument is missing
        """
        bound = []
        for arg in cls.signature:
            if arg.name in values:
                value = values[arg.name]
            elif arg.required:
                raise InfeasibleSample(f"{cls.name}: missing argument '{arg.name}'")
            else:
                value = arg.default
                if value is None and defaults:
                    value = defaults.get(arg.name)
            if arg.type == "num":
                value = float(value)
                if not math.isfinite(value):
                    raise InfeasibleSample(f"{cls.name}: {arg.name} is not finite")
                if arg.nonnegative and value < 0:
                    raise InfeasibleSample(f"{cls.name}: {arg.name} must be >= 0, got {value}")
            bound.append((arg.name, value))
        return BehaviorSpec(cls.name, tuple(bound))

    def action(self, agent: AgentState, world: WorldState, rng: np.random.Generator) -> Action:
        raise NotImplementedError

    # Shared helpers
    def cruise_accel(self, agent: AgentState, target_speed: float) -> float:
        return K_CRUISE * (target_speed - agent.speed)

    def ego_distance(self, agent: AgentState, world: WorldState) -> float:
        if not world.has_agent("ego") or agent.name == "ego":
            return math.inf
        ego = world.ego
        return math.hypot(ego.x - agent.x, ego.y - agent.y)

    def path_position(self, agent: AgentState) -> Tuple[float, float]:
        """Arc length and lateral offset of ``agent`` along its own path"""
        path = self.context.path
        if path is None:
            return 0.0, 0.0
        s, lateral, _ = path.project(agent.x, agent.y)
        return s, lateral

    def follow(self, accel: float, label: str = "follow", lateral: Optional[float] = None) -> Action:
        return Action(
            accel=accel,
            path=self.context.lanes,
            lateral=self.context.lateral if lateral is None else lateral,
            label=label,
        )

    def started(self, key: str, now: float) -> float:
        """Latch the first time ``key`` fired and return it"""
        return self.memory.setdefault(key, now)

    def elapsed(self, world: WorldState) -> float:
        """Seconds since this behavior first acted, which is its agent's spawn time"""
        return world.time - self.started("spawn", world.time)


def smoothstep(u: float) -> float:
    u = min(max(u, 0.0), 1.0)
    return u * u * (3.0 - 2.0 * u)
