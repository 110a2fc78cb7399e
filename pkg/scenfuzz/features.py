"""
Semantic feature space and scene instantiation

A validated ScenarioProgram defines a feature space: one continuous
dimension per ``uniform`` parameter and one discrete dimension per
``choice`` parameter, own parameters first, then every subscenario's in
declaration order with names qualified as ``<sub>.<name>``. A SamplePoint in
that space instantiates the program into a ConcreteScene on a map.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

from .behaviors import BEHAVIORS, BehaviorSpec, default_spec
from .exceptions import ExpressionError, InfeasibleSample, UnknownDimension
from .maps import MapModel, RegionRef
from .scenario import (
    AgentDecl,
    Binary,
    Call,
    Constant,
    DiscreteChoice,
    Expr,
    LanePlacement,
    Name,
    Num,
    ScenarioProgram,
    Str,
    Unary,
    UniformContinuous,
)
from .validators import Diagnostic, DiagnosticKind

logger = logging.getLogger(__name__)

# Behavior arguments that name lanes
LANE_ARGS = ("target_lane", "via")


# Expression evaluation

_NUMERIC_FUNCS: Dict[str, Callable[..., float]] = {
    "abs": abs,
    "sqrt": math.sqrt,
    "min": min,
    "max": max,
}


def _eval(expr: Expr, lookup: Callable[[str], Any]) -> Any:
    if isinstance(expr, (Num, Str)):
        return expr.value
    if isinstance(expr, Name):
        if expr.id == "pi":
            return math.pi
        return lookup(expr.id)
    if isinstance(expr, Call):
        args = [_eval(a, lookup) for a in expr.args]
        if expr.func == "distance":
            a, b = args
            return math.hypot(a.x - b.x, a.y - b.y)
        if expr.func == "speed":
            return float(args[0].speed)
        func = _NUMERIC_FUNCS.get(expr.func)
        if func is None:
            raise ExpressionError(f"unknown function '{expr.func}'")
        return float(func(*args))
    if isinstance(expr, Unary):
        value = _eval(expr.operand, lookup)
        return (not value) if expr.op == "not" else -value
    if isinstance(expr, Binary):
        if expr.op == "and":
            return bool(_eval(expr.left, lookup)) and bool(_eval(expr.right, lookup))
        if expr.op == "or":
            return bool(_eval(expr.left, lookup)) or bool(_eval(expr.right, lookup))
        left = _eval(expr.left, lookup)
        right = _eval(expr.right, lookup)
        op = expr.op
        if op in ("+", "-", "*", "/") and (isinstance(left, str) or isinstance(right, str)):
            raise ExpressionError(f"'{op}' needs numbers")
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            return left / right
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        if op == ">=":
            return left >= right
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
    raise ExpressionError(f"cannot evaluate {expr!r}")


def evaluate(expr: Expr, lookup: Callable[[str], Any]) -> Any:
    """
    Value of ``expr`` with names resolved by ``lookup``

    ``pi`` is built in. Agents resolve to objects with ``x``, ``y`` and
    ``speed`` attributes.

    Raises:
        ExpressionError: arithmetic failure, type mismatch or a non-finite result
    """
    try:
        value = _eval(expr, lookup)
    except (ZeroDivisionError, OverflowError, ValueError, TypeError, AttributeError) as e:
        raise ExpressionError(str(e) or type(e).__name__)
    if isinstance(value, float) and not math.isfinite(value):
        raise ExpressionError("expression is not finite")
    return value


# Feature space


@dataclass(frozen=True)
class ContinuousDim:
    name: str
    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class DiscreteDim:
    name: str
    choices: Tuple[Any, ...]


@dataclass(frozen=True)
class FeatureSpace:
    continuous: Tuple[ContinuousDim, ...] = ()
    discrete: Tuple[DiscreteDim, ...] = ()

    @property
    def names(self) -> List[str]:
        return [d.name for d in self.continuous] + [d.name for d in self.discrete]

    @property
    def is_empty(self) -> bool:
        return not self.continuous and not self.discrete

    def dimension(self, name: str):
        for dim in (*self.continuous, *self.discrete):
            if dim.name == name:
                return dim
        raise UnknownDimension(f"no dimension named '{name}'")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "continuous": [[d.name, d.lo, d.hi] for d in self.continuous],
            "discrete": [[d.name, list(d.choices)] for d in self.discrete],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FeatureSpace":
        return cls(
            continuous=tuple(ContinuousDim(n, float(lo), float(hi)) for n, lo, hi in data.get("continuous", [])),
            discrete=tuple(DiscreteDim(n, tuple(c)) for n, c in data.get("discrete", [])),
        )


@dataclass(frozen=True)
class SamplePoint:
    """
    A point in a feature space

    ``unit`` holds the pre-scaling coordinates of the continuous dims.
    ``arms`` records the bandit arm drawn per dimension (MAB only).
    """

    continuous: Tuple[float, ...] = ()
    discrete: Tuple[int, ...] = ()
    unit: Tuple[float, ...] = ()
    arms: Tuple[int, ...] = ()
    campaign_id: str = ""

    def values(self, space: FeatureSpace) -> Dict[str, Any]:
        out: Dict[str, Any] = {d.name: v for d, v in zip(space.continuous, self.continuous)}
        out.update({d.name: d.choices[i] for d, i in zip(space.discrete, self.discrete)})
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "continuous": list(self.continuous),
            "discrete": list(self.discrete),
            "unit": list(self.unit),
            "arms": list(self.arms),
            "campaign_id": self.campaign_id,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SamplePoint":
        return cls(
            continuous=tuple(float(v) for v in data.get("continuous", [])),
            discrete=tuple(int(v) for v in data.get("discrete", [])),
            unit=tuple(float(v) for v in data.get("unit", [])),
            arms=tuple(int(v) for v in data.get("arms", [])),
            campaign_id=data.get("campaign_id", ""),
        )


class _Frame:
    """Name resolution for one scenario block and its subscenarios"""

    def __init__(self, prog: ScenarioProgram, parent: Optional["_Frame"] = None, prefix: str = ""):
        self.prog = prog
        self.parent = parent
        self.prefix = prefix
        self.group = prefix[:-1] if prefix else None
        self.values: Dict[str, Any] = {}
        self.children: Dict[str, "_Frame"] = {
            sub.name: _Frame(sub, self, f"{prefix}{sub.name}.") for sub in prog.subscenarios
        }

    def walk(self) -> Iterator["_Frame"]:
        yield self
        for sub in self.prog.subscenarios:
            yield from self.children[sub.name].walk()

    def qualify(self, name: str) -> str:
        return f"{self.prefix}{name}"

    def _local(self, name: str) -> Tuple[bool, Any]:
        if name in self.values:
            return True, self.values[name]
        head, dot, rest = name.partition(".")
        if dot and head in self.children:
            return self.children[head]._local(rest)
        return False, None

    def lookup(self, name: str) -> Any:
        frame: Optional[_Frame] = self
        while frame is not None:
            found, value = frame._local(name)
            if found:
                return value
            frame = frame.parent
        raise ExpressionError(f"'{name}' has no value yet")

    def owner(self, name: str) -> Optional["_Frame"]:
        """Frame that declares ``name`` as seen from this frame"""
        frame: Optional[_Frame] = self
        while frame is not None:
            if name in frame.values:
                return frame
            frame = frame.parent
        return None


def _feature_walk(prog: ScenarioProgram, on_param: Callable) -> _Frame:
    root = _Frame(prog)
    for frame in root.walk():
        for param in frame.prog.params:
            frame.values[param.name] = on_param(frame, param)
    return root


def extract_feature_space(prog: ScenarioProgram) -> FeatureSpace:
    """Dimensions of every sampled parameter, in declaration order"""
    continuous: List[ContinuousDim] = []
    discrete: List[DiscreteDim] = []

    def on_param(frame: _Frame, param) -> Any:
        dist = param.dist
        name = frame.qualify(param.name)
        if isinstance(dist, UniformContinuous):
            lo = float(evaluate(dist.lo, frame.lookup))
            hi = float(evaluate(dist.hi, frame.lookup))
            continuous.append(ContinuousDim(name, lo, hi))
            return 0.5 * (lo + hi)
        if isinstance(dist, DiscreteChoice):
            choices = tuple(evaluate(v, frame.lookup) for v in dist.values)
            discrete.append(DiscreteDim(name, choices))
            return choices[0]
        return evaluate(dist.value, frame.lookup)

    _feature_walk(prog, on_param)
    return FeatureSpace(tuple(continuous), tuple(discrete))


def midpoint(space: FeatureSpace) -> SamplePoint:
    """Centre of every continuous range with the first choice of every discrete dim"""
    return SamplePoint(
        continuous=tuple(0.5 * (d.lo + d.hi) for d in space.continuous),
        discrete=tuple(0 for _ in space.discrete),
        unit=tuple(0.5 for _ in space.continuous),
    )


# Concrete scenes


@dataclass(frozen=True)
class ConcreteAgent:
    name: str
    kind: str
    x: float
    y: float
    heading: float
    speed: float
    behavior: BehaviorSpec
    lane: Optional[str] = None
    s: Optional[float] = None
    lateral: float = 0.0
    anchor_lane: Optional[str] = None
    group: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "pose": [self.x, self.y, self.heading],
            "speed": self.speed,
            "lane": self.lane,
            "s": self.s,
            "lateral": self.lateral,
            "anchor_lane": self.anchor_lane,
            "group": self.group,
            "behavior": {"name": self.behavior.name, "args": dict(self.behavior.args)},
        }


@dataclass(frozen=True)
class AgentGroup:
    """When the agents of one subscenario are alive"""

    name: str
    mode: str = "parallel"
    start: float = 0.0
    end: float = math.inf
    trigger: Optional[RegionRef] = None
    trigger_agent: str = "ego"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "mode": self.mode,
            "start": self.start,
            "end": None if math.isinf(self.end) else self.end,
            "trigger": self.trigger.describe() if self.trigger else None,
            "trigger_agent": self.trigger_agent,
        }


@dataclass(frozen=True)
class ConcreteScene:
    name: str
    agents: Tuple[ConcreteAgent, ...]
    route: Tuple[str, ...]
    params: Tuple[Tuple[str, Any], ...] = ()
    groups: Tuple[AgentGroup, ...] = ()
    max_time: Optional[float] = None
    predicate: Optional[Expr] = field(default=None, compare=False)
    weather: Optional[str] = None

    @property
    def ego(self) -> ConcreteAgent:
        return self.agents[0]

    @property
    def cruise_speed(self) -> Optional[float]:
        """Cruise speed requested by the ego's FollowLane behavior, if any"""
        spec = self.ego.behavior
        return spec.get("speed") if spec.name == "FollowLane" else None

    def group(self, name: Optional[str]) -> Optional[AgentGroup]:
        for group in self.groups:
            if group.name == name:
                return group
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "agents": [a.to_dict() for a in self.agents],
            "route": list(self.route),
            "params": {k: v for k, v in self.params},
            "groups": [g.to_dict() for g in self.groups],
            "max_time": self.max_time,
            "weather": self.weather,
        }


def _infeasible(what: str, error: Exception) -> InfeasibleSample:
    return InfeasibleSample(f"{what}: {error}")


@dataclass(frozen=True)
class _Placement:
    x: float
    y: float
    heading: float
    lane: Optional[str]
    s: Optional[float]
    lateral: float
    anchor: Optional[str]


def _place(decl: AgentDecl, frame: _Frame, map_model: MapModel) -> _Placement:
    placement = decl.placement
    if isinstance(placement, LanePlacement):
        lane_id = evaluate(placement.lane, frame.lookup)
        if lane_id not in map_model.lanes:
            raise InfeasibleSample(f"{decl.name}: lane '{lane_id}' is not on the map")
        lane = map_model.lanes[lane_id]
        s = float(evaluate(placement.offset, frame.lookup))
        if not 0.0 <= s <= lane.length:
            raise InfeasibleSample(
                f"{decl.name}: offset {s:.3f} is off lane '{lane_id}' (length {lane.length:.3f})"
            )
        lateral = 0.0
        if placement.lateral is not None:
            lateral = float(evaluate(placement.lateral, frame.lookup))
            if placement.side == "right":
                lateral = -lateral
        x, y, heading = lane.centerline.point_at(s, lateral)
        on_lane = abs(lateral) <= lane.width / 2.0
        return _Placement(x, y, heading, lane_id if on_lane else None, s if on_lane else None, lateral, lane_id)
    x = float(evaluate(placement.x, frame.lookup))
    y = float(evaluate(placement.y, frame.lookup))
    heading = float(evaluate(placement.heading, frame.lookup))
    lane_id, dist = map_model.nearest_lane(x, y)
    s, lateral, _ = map_model.lanes[lane_id].centerline.project(x, y)
    if dist <= map_model.lanes[lane_id].width / 2.0:
        return _Placement(x, y, heading, lane_id, s, lateral, lane_id)
    return _Placement(x, y, heading, None, None, lateral, lane_id)


def _bind_behavior(
    decl: AgentDecl, frame: _Frame, map_model: MapModel, anchor: Optional[str], speed: float
) -> BehaviorSpec:
    call = decl.behavior
    if call is None:
        return default_spec(decl.kind, speed)
    cls = BEHAVIORS[call.name]
    values = {key: evaluate(expr, frame.lookup) for key, expr in call.args}
    for key in LANE_ARGS:
        lane_id = values.get(key)
        if lane_id and lane_id not in map_model.lanes:
            raise InfeasibleSample(f"{decl.name}: {call.name} {key} '{lane_id}' is not on the map")
    leader = values.get("leader")
    if leader:
        owner = frame.owner(leader)
        values["leader"] = owner.qualify(leader) if owner is not None else leader
    return cls.bind(values, defaults={"target_lane": anchor or ""})


def instantiate(prog: ScenarioProgram, point: SamplePoint, map_model: MapModel) -> ConcreteScene:
    """
    Bind every parameter, place every agent and check every requirement

    Raises:
        InfeasibleSample: a requirement is false, a placement is off the map
            or an expression cannot be evaluated
        ValueError: ``point`` does not match the program's feature space
    """
    cursor = {"continuous": 0, "discrete": 0}

    def on_param(frame: _Frame, param) -> Any:
        dist = param.dist
        if isinstance(dist, UniformContinuous):
            i = cursor["continuous"]
            cursor["continuous"] += 1
            return float(point.continuous[i])
        if isinstance(dist, DiscreteChoice):
            i = cursor["discrete"]
            cursor["discrete"] += 1
            return evaluate(dist.values[point.discrete[i]], frame.lookup)
        return evaluate(dist.value, frame.lookup)

    try:
        root = _feature_walk(prog, on_param)
    except IndexError:
        raise ValueError("sample point does not match the program's feature space")
    except ExpressionError as e:
        raise _infeasible("parameter", e)
    if cursor["continuous"] != len(point.continuous) or cursor["discrete"] != len(point.discrete):
        raise ValueError("sample point does not match the program's feature space")

    params: List[Tuple[str, Any]] = []
    for frame in root.walk():
        for param in frame.prog.params:
            params.append((frame.qualify(param.name), frame.values[param.name]))

    agents: List[ConcreteAgent] = []
    for frame in root.walk():
        for decl in frame.prog.agents:
            try:
                placed = _place(decl, frame, map_model)
                speed = 0.0 if decl.speed is None else float(evaluate(decl.speed, frame.lookup))
                if speed < 0:
                    raise InfeasibleSample(f"{decl.name}: speed must be >= 0, got {speed}")
                behavior = _bind_behavior(decl, frame, map_model, placed.anchor, speed)
            except ExpressionError as e:
                raise _infeasible(decl.name, e)
            agent = ConcreteAgent(
                name=frame.qualify(decl.name),
                kind=decl.kind,
                x=placed.x,
                y=placed.y,
                heading=placed.heading,
                speed=speed,
                behavior=behavior,
                lane=placed.lane,
                s=placed.s,
                lateral=placed.lateral,
                anchor_lane=placed.anchor,
                group=frame.group,
            )
            frame.values[decl.name] = agent
            agents.append(agent)

    for frame in root.walk():
        for req in frame.prog.requirements:
            try:
                holds = evaluate(req, frame.lookup)
            except ExpressionError as e:
                raise _infeasible("requirement", e)
            if not holds:
                raise InfeasibleSample(f"requirement on line {req.line} is false")

    egos = [a for a in agents if a.name == "ego"]
    if not egos:
        raise InfeasibleSample("scenario has no ego")
    ego = egos[0]
    agents = [ego] + [a for a in agents if a.name != "ego"]

    try:
        route = tuple(evaluate(r, root.lookup) for r in prog.route)
    except ExpressionError as e:
        raise _infeasible("route", e)
    for lane_id in route:
        if lane_id not in map_model.lanes:
            raise InfeasibleSample(f"route lane '{lane_id}' is not on the map")
    if not route:
        if ego.lane is None:
            raise InfeasibleSample("ego is off every lane and no route is given")
        route = map_model.successor_chain(ego.lane, via=ego.behavior.get("via") or None)

    max_time = None
    if prog.termination.max_time is not None:
        max_time = float(evaluate(prog.termination.max_time, root.lookup))

    return ConcreteScene(
        name=prog.name,
        agents=tuple(agents),
        route=route,
        params=tuple(params),
        groups=_groups(prog, root),
        max_time=max_time,
        predicate=prog.termination.predicate,
        weather=prog.weather,
    )


def _groups(prog: ScenarioProgram, root: _Frame) -> Tuple[AgentGroup, ...]:
    comp = prog.composition
    groups: Dict[str, AgentGroup] = {}
    if comp is not None:
        elapsed = 0.0
        for entry in comp.entries:
            sub = prog.subscenario(entry.name)
            child = root.children[entry.name]
            if comp.mode == "sequential":
                length = float(evaluate(sub.termination.max_time, child.lookup))
                groups[entry.name] = AgentGroup(entry.name, "sequential", start=elapsed, end=elapsed + length)
                elapsed += length
            elif comp.mode == "opportunistic":
                region = entry.trigger.region
                if region.kind == "circle":
                    ref = RegionRef(
                        "circle",
                        center=(
                            float(evaluate(region.center[0], root.lookup)),
                            float(evaluate(region.center[1], root.lookup)),
                        ),
                        radius=float(evaluate(region.radius, root.lookup)),
                    )
                else:
                    ref = RegionRef(region.kind, id=region.id)
                owner = root.owner(entry.trigger.agent)
                agent = owner.qualify(entry.trigger.agent) if owner is not None else entry.trigger.agent
                groups[entry.name] = AgentGroup(entry.name, "opportunistic", trigger=ref, trigger_agent=agent)
            else:
                groups[entry.name] = AgentGroup(entry.name, "parallel")
    for sub in prog.subscenarios:
        groups.setdefault(sub.name, AgentGroup(sub.name, "parallel"))
    return tuple(groups[sub.name] for sub in prog.subscenarios)


# Static map checks


def _lane_literals(expr: Expr, frame: _Frame, prog: ScenarioProgram) -> List[Tuple[str, Expr]]:
    """Lane ids a lane-valued expression can take without sampling continuous values"""
    if isinstance(expr, Str):
        return [(expr.value, expr)]
    if isinstance(expr, Name):
        for param in prog.params:
            if param.name != expr.id:
                continue
            if isinstance(param.dist, DiscreteChoice):
                return [(v.value, expr) for v in param.dist.values if isinstance(v, Str)]
            if isinstance(param.dist, Constant) and isinstance(param.dist.value, Str):
                return [(param.dist.value.value, expr)]
        if frame.parent is not None:
            return _lane_literals(expr, frame.parent, frame.parent.prog)
    return []


def check_against_map(prog: ScenarioProgram, map_model: MapModel) -> List[Diagnostic]:
    """
    Report lane, intersection and region ids that are missing from the map,
    and constant lane placements that fall off their lane
    """
    diagnostics: List[Diagnostic] = []

    def report(message: str, node: Any) -> None:
        diagnostics.append(
            Diagnostic(DiagnosticKind.MAP, message, getattr(node, "line", 0), getattr(node, "column", 0))
        )

    def check_lane(expr: Expr, frame: _Frame, what: str) -> None:
        for lane_id, node in _lane_literals(expr, frame, frame.prog):
            if lane_id and lane_id not in map_model.lanes:
                report(f"{what} '{lane_id}' is not on map '{map_model.name}'", node)

    root = _feature_walk(prog, lambda frame, param: None)
    for frame in root.walk():
        sub_prog = frame.prog
        for decl in sub_prog.agents:
            placement = decl.placement
            if isinstance(placement, LanePlacement):
                check_lane(placement.lane, frame, "lane")
                if isinstance(placement.lane, Str) and placement.lane.value in map_model.lanes:
                    try:
                        s = evaluate(placement.offset, _constants_only)
                    except (ExpressionError, _NotConstant):
                        s = None
                    length = map_model.lanes[placement.lane.value].length
                    if s is not None and not 0.0 <= s <= length:
                        report(f"{decl.name}: offset {s} is off lane '{placement.lane.value}'", decl)
            if decl.behavior is not None:
                for key, expr in decl.behavior.args:
                    if key in LANE_ARGS:
                        check_lane(expr, frame, f"{decl.behavior.name} {key}")
        for lane in sub_prog.route:
            check_lane(lane, frame, "route lane")
        if sub_prog.composition is not None:
            for entry in sub_prog.composition.entries:
                if entry.trigger is None or entry.trigger.region.kind == "circle":
                    continue
                region = entry.trigger.region
                ref = RegionRef(region.kind, id=region.id)
                if not map_model.has_region(ref):
                    report(f"trigger {ref.describe()} is not on map '{map_model.name}'", entry)
    return diagnostics


class _NotConstant(Exception):
    pass


def _constants_only(name: str) -> Any:
    raise _NotConstant(name)
