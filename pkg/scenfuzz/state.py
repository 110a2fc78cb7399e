"""
World state and per-step actions exchanged by the simulator, behaviors and SUTs
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Tuple


@dataclass(frozen=True)
class Action:
    """
    One agent's request for the next step

    Vehicles track ``path`` with pure pursuit at ``lateral`` metres (left
    positive) unless an explicit ``yaw_rate`` is given. Pedestrians walk
    toward ``waypoint`` at ``speed``.
    """

    accel: float = 0.0
    path: Tuple[str, ...] = ()
    lateral: float = 0.0
    yaw_rate: Optional[float] = None
    waypoint: Optional[Tuple[float, float]] = None
    speed: Optional[float] = None
    label: str = "hold"

    @classmethod
    def hold(cls) -> "Action":
        return cls()

    @classmethod
    def brake(cls, decel: float = 8.0, label: str = "brake", **kwargs) -> "Action":
        return cls(accel=-abs(decel), label=label, **kwargs)

    @classmethod
    def wait(cls, label: str = "wait") -> "Action":
        return cls(accel=-8.0, speed=0.0, label=label)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["path"] = list(self.path)
        if self.waypoint is not None:
            data["waypoint"] = list(self.waypoint)
        return data


@dataclass(frozen=True)
class AgentState:
    name: str
    kind: str
    x: float
    y: float
    heading: float
    speed: float = 0.0
    lane: Optional[str] = None
    s: Optional[float] = None
    alive: bool = True

    @property
    def position(self) -> Tuple[float, float]:
        return (self.x, self.y)

    @property
    def is_vehicle(self) -> bool:
        return self.kind in ("car", "bus")

    def moved(self, **changes) -> "AgentState":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AgentState":
        return cls(**data)


@dataclass(frozen=True)
class WorldState:
    time: float
    agents: Tuple[AgentState, ...]
    ego_lane: Optional[str] = None
    _index: Dict[str, int] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {a.name: i for i, a in enumerate(self.agents)})

    @property
    def ego(self) -> AgentState:
        return self.agents[self._index["ego"]]

    def agent(self, name: str) -> AgentState:
        return self.agents[self._index[name]]

    def has_agent(self, name: str) -> bool:
        return name in self._index

    def others(self, name: str = "ego", alive_only: bool = True):
        return [a for a in self.agents if a.name != name and (a.alive or not alive_only)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "time": self.time,
            "ego_lane": self.ego_lane,
            "agents": [a.to_dict() for a in self.agents],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "WorldState":
        return cls(
            time=float(data["time"]),
            agents=tuple(AgentState.from_dict(a) for a in data["agents"]),
            ego_lane=data.get("ego_lane"),
        )
