"""
Scenario program AST and canonical pretty printer

Nodes are frozen dataclasses. Source positions are excluded from equality,
so a program printed with ``format_program`` and parsed again compares
equal to the original.
"""

from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple, Union

AGENT_KINDS = ("car", "bus", "pedestrian")
COMPOSITION_MODES = ("parallel", "sequential", "opportunistic")
REGION_KINDS = ("lane", "intersection", "region", "circle")
TRIGGER_ACTION = "spawn_on_enter_despawn_on_exit"


def _pos():
    return field(default=0, compare=False, repr=False)


# Expressions


@dataclass(frozen=True)
class Num:
    value: float
    line: int = _pos()
    column: int = _pos()


@dataclass(frozen=True)
class Str:
    value: str
    line: int = _pos()
    column: int = _pos()


@dataclass(frozen=True)
class Name:
    id: str
    line: int = _pos()
    column: int = _pos()


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple["Expr", ...]
    line: int = _pos()
    column: int = _pos()


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: "Expr"
    line: int = _pos()
    column: int = _pos()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = _pos()
    column: int = _pos()


Expr = Union[Num, Str, Name, Call, Unary, Binary]

ARITHMETIC_OPS = ("+", "-", "*", "/")
COMPARISON_OPS = ("<", "<=", ">", ">=", "==", "!=")
BOOLEAN_OPS = ("and", "or")


def iter_names(expr: Expr) -> Iterator[Name]:
    """Every Name node inside ``expr``, depth first"""
    if isinstance(expr, Name):
        yield expr
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from iter_names(arg)
    elif isinstance(expr, Unary):
        yield from iter_names(expr.operand)
    elif isinstance(expr, Binary):
        yield from iter_names(expr.left)
        yield from iter_names(expr.right)


# Distributions


@dataclass(frozen=True)
class UniformContinuous:
    lo: Expr
    hi: Expr


@dataclass(frozen=True)
class DiscreteChoice:
    values: Tuple[Expr, ...]


@dataclass(frozen=True)
class Constant:
    value: Expr


Distribution = Union[UniformContinuous, DiscreteChoice, Constant]


@dataclass(frozen=True)
class ParamDecl:
    name: str
    dist: Distribution
    line: int = _pos()
    column: int = _pos()


# Agents


@dataclass(frozen=True)
class LanePlacement:
    lane: Expr
    offset: Expr
    lateral: Optional[Expr] = None
    side: Optional[str] = None  # "left" or "right"


@dataclass(frozen=True)
class PosePlacement:
    x: Expr
    y: Expr
    heading: Expr


Placement = Union[LanePlacement, PosePlacement]


@dataclass(frozen=True)
class BehaviorCall:
    name: str
    args: Tuple[Tuple[str, Expr], ...] = ()
    line: int = _pos()
    column: int = _pos()


@dataclass(frozen=True)
class AgentDecl:
    name: str
    kind: str
    placement: Placement
    speed: Optional[Expr] = None
    behavior: Optional[BehaviorCall] = None
    line: int = _pos()
    column: int = _pos()

    @property
    def is_ego(self) -> bool:
        return self.name == "ego"


# Composition


@dataclass(frozen=True)
class RegionExpr:
    kind: str
    id: Optional[str] = None
    center: Optional[Tuple[Expr, Expr]] = None
    radius: Optional[Expr] = None


@dataclass(frozen=True)
class TriggerSpec:
    region: RegionExpr
    agent: str = "ego"
    action: str = TRIGGER_ACTION


@dataclass(frozen=True)
class CompositionEntry:
    name: str
    trigger: Optional[TriggerSpec] = None
    line: int = _pos()
    column: int = _pos()


@dataclass(frozen=True)
class CompositionSpec:
    mode: str
    entries: Tuple[CompositionEntry, ...]
    line: int = _pos()
    column: int = _pos()


@dataclass(frozen=True)
class TerminationSpec:
    max_time: Optional[Expr] = None
    predicate: Optional[Expr] = None


@dataclass(frozen=True)
class ScenarioProgram:
    name: str
    params: Tuple[ParamDecl, ...] = ()
    agents: Tuple[AgentDecl, ...] = ()
    subscenarios: Tuple["ScenarioProgram", ...] = ()
    composition: Optional[CompositionSpec] = None
    requirements: Tuple[Expr, ...] = ()
    termination: TerminationSpec = TerminationSpec()
    map_ref: Optional[str] = None
    weather: Optional[str] = None
    route: Tuple[Expr, ...] = ()
    line: int = _pos()
    column: int = _pos()

    @property
    def ego(self) -> Optional[AgentDecl]:
        for agent in self.agents:
            if agent.is_ego:
                return agent
        return None

    def subscenario(self, name: str) -> Optional["ScenarioProgram"]:
        for sub in self.subscenarios:
            if sub.name == name:
                return sub
        return None


# Pretty printer


def _format_number(value: float) -> str:
    text = repr(float(value))
    return text


def _format_string(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Num):
        return _format_number(expr.value)
    if isinstance(expr, Str):
        return _format_string(expr.value)
    if isinstance(expr, Name):
        return expr.id
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(format_expr(a) for a in expr.args)})"
    if isinstance(expr, Unary):
        sep = " " if expr.op == "not" else ""
        return f"({expr.op}{sep}{format_expr(expr.operand)})"
    if isinstance(expr, Binary):
        return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"
    raise TypeError(f"not an expression: {expr!r}")


def _format_dist(dist: Distribution) -> str:
    if isinstance(dist, UniformContinuous):
        return f"uniform({format_expr(dist.lo)}, {format_expr(dist.hi)})"
    if isinstance(dist, DiscreteChoice):
        return f"choice({', '.join(format_expr(v) for v in dist.values)})"
    return format_expr(dist.value)


def _format_agent(agent: AgentDecl) -> str:
    head = "ego =" if agent.is_ego else f"agent {agent.name} ="
    placement = agent.placement
    if isinstance(placement, LanePlacement):
        where = f"on lane {format_expr(placement.lane)} at {format_expr(placement.offset)}"
        if placement.lateral is not None:
            where += f" offset {placement.side} {format_expr(placement.lateral)}"
    else:
        where = (
            f"at ({format_expr(placement.x)}, {format_expr(placement.y)}) "
            f"heading {format_expr(placement.heading)}"
        )
    text = f"{head} {agent.kind} {where}"
    if agent.speed is not None:
        text += f", speed {format_expr(agent.speed)}"
    if agent.behavior is not None:
        args = ", ".join(f"{k}={format_expr(v)}" for k, v in agent.behavior.args)
        text += f", behavior {agent.behavior.name}({args})"
    return text


def _format_region(region: RegionExpr) -> str:
    if region.kind == "circle":
        cx, cy = region.center
        return f"circle(({format_expr(cx)}, {format_expr(cy)}), {format_expr(region.radius)})"
    return f"{region.kind} {_format_string(region.id)}"


def _format_body(prog: ScenarioProgram, indent: str) -> list:
    lines = []
    if prog.map_ref is not None:
        lines.append(f"map {_format_string(prog.map_ref)}")
    if prog.weather is not None:
        lines.append(f"weather {_format_string(prog.weather)}")
    for param in prog.params:
        lines.append(f"param {param.name} = {_format_dist(param.dist)}")
    if prog.route:
        lines.append("route " + ", ".join(format_expr(r) for r in prog.route))
    for agent in prog.agents:
        lines.append(_format_agent(agent))
    for req in prog.requirements:
        lines.append(f"require {format_expr(req)}")
    if prog.termination.max_time is not None:
        lines.append(f"terminate after {format_expr(prog.termination.max_time)}")
    if prog.termination.predicate is not None:
        lines.append(f"terminate when {format_expr(prog.termination.predicate)}")
    out = [indent + line for line in lines]
    for sub in prog.subscenarios:
        out.append(f"{indent}scenario {sub.name}:")
        out.extend(_format_body(sub, indent + "    "))
        out.append(f"{indent}end")
    if prog.composition is not None:
        out.append(f"{indent}compose {prog.composition.mode}:")
        for entry in prog.composition.entries:
            text = entry.name
            if entry.trigger is not None:
                who = "" if entry.trigger.agent == "ego" else f"{entry.trigger.agent} "
                text += f" when {who}enters {_format_region(entry.trigger.region)}"
            out.append(f"{indent}    {text}")
        out.append(f"{indent}end")
    return out


def format_program(prog: ScenarioProgram) -> str:
    """Canonical source text for ``prog``"""
    return "\n".join(_format_body(prog, "")) + "\n"
