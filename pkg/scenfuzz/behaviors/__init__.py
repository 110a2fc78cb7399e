"""
Built-in agent behaviors, registered by name
"""

from typing import Dict, Optional, Type

from ..discovery import discover_behaviors
from .base import REQUIRED, Arg, Behavior, BehaviorContext, BehaviorSpec

BEHAVIORS: Dict[str, Type[Behavior]] = discover_behaviors([__name__])


def get_behavior(name: str) -> Optional[Type[Behavior]]:
    return BEHAVIORS.get(name)


def default_spec(kind: str, speed: float) -> BehaviorSpec:
    """Behavior of an agent declared without one: vehicles keep their lane and speed, pedestrians stand"""
    if kind == "pedestrian":
        return BEHAVIORS["Wait"].bind({})
    return BEHAVIORS["FollowLane"].bind({"speed": speed})


def create_behavior(spec: BehaviorSpec, context: BehaviorContext) -> Behavior:
    return BEHAVIORS[spec.name](spec, context)


__all__ = [
    "Arg",
    "BEHAVIORS",
    "Behavior",
    "BehaviorContext",
    "BehaviorSpec",
    "REQUIRED",
    "create_behavior",
    "default_spec",
    "get_behavior",
]
