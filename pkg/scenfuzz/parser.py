"""
Scenario language parser

Source text is tokenized line by line and parsed with a recursive-descent
parser. A malformed line produces a diagnostic and parsing resumes on the
next line, so one run reports every independent error. A semantic pass then
checks names, types and values on the assembled program.

Expression precedence, loosest first:

    or > and > not > comparison > + - > * / > unary minus > call, literal, name
"""

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .behaviors import BEHAVIORS
from .exceptions import ExpressionError, ScenarioParseError
from .features import evaluate
from .scenario import (
    AGENT_KINDS,
    COMPARISON_OPS,
    COMPOSITION_MODES,
    AgentDecl,
    BehaviorCall,
    Binary,
    Call,
    CompositionEntry,
    CompositionSpec,
    Constant,
    DiscreteChoice,
    Expr,
    LanePlacement,
    Name,
    Num,
    ParamDecl,
    PosePlacement,
    RegionExpr,
    ScenarioProgram,
    Str,
    TerminationSpec,
    TriggerSpec,
    Unary,
    UniformContinuous,
)
from .validators import Diagnostic, DiagnosticKind, ValidationSeverity, has_errors

logger = logging.getLogger(__name__)

RESERVED = frozenset({"and", "or", "not", "pi", "time", "end", "ego"})
MAX_NESTING = 48

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\f\v]+)
  | (?P<comment>\#.*)
  | (?P<number>(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op><=|>=|==|!=|[<>+\-*/(),=:])
    """,
    re.VERBOSE,
)
_ESCAPE_RE = re.compile(r"\\(.)")


@dataclass(frozen=True)
class Token:
    kind: str  # NUMBER, STRING, NAME, OP, EOL
    value: Any
    line: int
    column: int


@dataclass
class ParseResult:
    program: Optional[ScenarioProgram]
    diagnostics: List[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.program is not None and not has_errors(self.diagnostics)


class _SyntaxIssue(Exception):
    def __init__(self, message: str, token: Token, kind: DiagnosticKind = DiagnosticKind.SYNTAX):
        super().__init__(message)
        self.message = message
        self.token = token
        self.kind = kind


def tokenize(source: str) -> Tuple[List[List[Token]], List[Diagnostic]]:
    """
    Split source into per-line token lists

    Blank and comment-only lines are dropped. Every kept line ends with an
    EOL token. Lines with lexical errors are reported and dropped.
    """
    lines: List[List[Token]] = []
    diagnostics: List[Diagnostic] = []
    for lineno, raw in enumerate(source.split("\n"), start=1):
        text = raw[:-1] if raw.endswith("\r") else raw
        tokens: List[Token] = []
        pos = 0
        bad = False
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                char = text[pos]
                message = "unterminated string literal" if char == '"' else f"unexpected character {char!r}"
                diagnostics.append(Diagnostic(DiagnosticKind.SYNTAX, message, lineno, pos + 1))
                bad = True
                break
            kind = m.lastgroup
            column = pos + 1
            pos = m.end()
            if kind in ("ws", "comment"):
                continue
            if kind == "number":
                value = float(m.group())
                if not math.isfinite(value):
                    diagnostics.append(
                        Diagnostic(DiagnosticKind.VALUE, "numeric literal out of range", lineno, column)
                    )
                    bad = True
                    break
                tokens.append(Token("NUMBER", value, lineno, column))
            elif kind == "string":
                tokens.append(Token("STRING", _ESCAPE_RE.sub(r"\1", m.group()[1:-1]), lineno, column))
            elif kind == "name":
                tokens.append(Token("NAME", m.group(), lineno, column))
            else:
                tokens.append(Token("OP", m.group(), lineno, column))
        if bad or not tokens:
            continue
        tokens.append(Token("EOL", None, lineno, len(text) + 1))
        lines.append(tokens)
    return lines, diagnostics


class _LineParser:
    """Cursor over one line's tokens, with the expression grammar"""

    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0
        self.depth = 0

    # Navigation
    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOL":
            self.pos += 1
        return tok

    def check(self, kind: str, value: Any = None, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok.kind == kind and (value is None or tok.value == value)

    def match(self, kind: str, value: Any = None) -> Optional[Token]:
        if self.check(kind, value):
            return self.advance()
        return None

    def expect(self, kind: str, value: Any = None, what: Optional[str] = None) -> Token:
        if self.check(kind, value):
            return self.advance()
        found = self.peek()
        wanted = what or (repr(value) if value is not None else kind.lower())
        shown = "end of line" if found.kind == "EOL" else repr(found.value)
        raise _SyntaxIssue(f"expected {wanted}, found {shown}", found)

    def keyword(self, word: str) -> Token:
        return self.expect("NAME", word)

    def identifier(self, what: str = "identifier") -> Token:
        tok = self.expect("NAME", what=what)
        if "." in tok.value:
            raise _SyntaxIssue(f"{what} may not contain '.'", tok)
        return tok

    def end_of_line(self) -> None:
        self.expect("EOL", what="end of line")

    # Expressions
    def expression(self) -> Expr:
        return self._or()

    def _nest(self, tok: Token) -> None:
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise _SyntaxIssue("expression nested too deeply", tok)

    def _or(self) -> Expr:
        left = self._and()
        while self.check("NAME", "or"):
            tok = self.advance()
            left = Binary("or", left, self._and(), tok.line, tok.column)
        return left

    def _and(self) -> Expr:
        left = self._not()
        while self.check("NAME", "and"):
            tok = self.advance()
            left = Binary("and", left, self._not(), tok.line, tok.column)
        return left

    def _not(self) -> Expr:
        if self.check("NAME", "not"):
            tok = self.advance()
            self._nest(tok)
            operand = self._not()
            self.depth -= 1
            return Unary("not", operand, tok.line, tok.column)
        return self._comparison()

    def _comparison(self) -> Expr:
        left = self._additive()
        if self.peek().kind == "OP" and self.peek().value in COMPARISON_OPS:
            tok = self.advance()
            left = Binary(tok.value, left, self._additive(), tok.line, tok.column)
            if self.peek().kind == "OP" and self.peek().value in COMPARISON_OPS:
                raise _SyntaxIssue("chained comparisons are not supported", self.peek())
        return left

    def _additive(self) -> Expr:
        left = self._multiplicative()
        while self.peek().kind == "OP" and self.peek().value in ("+", "-"):
            tok = self.advance()
            left = Binary(tok.value, left, self._multiplicative(), tok.line, tok.column)
        return left

    def _multiplicative(self) -> Expr:
        left = self._unary()
        while self.peek().kind == "OP" and self.peek().value in ("*", "/"):
            tok = self.advance()
            left = Binary(tok.value, left, self._unary(), tok.line, tok.column)
        return left

    def _unary(self) -> Expr:
        if self.check("OP", "-"):
            tok = self.advance()
            self._nest(tok)
            operand = self._unary()
            self.depth -= 1
            if isinstance(operand, Num):
                return Num(-operand.value, tok.line, tok.column)
            return Unary("-", operand, tok.line, tok.column)
        return self._primary()

    def _primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return Num(tok.value, tok.line, tok.column)
        if tok.kind == "STRING":
            self.advance()
            return Str(tok.value, tok.line, tok.column)
        if tok.kind == "NAME" and tok.value not in ("and", "or", "not"):
            self.advance()
            if self.check("OP", "("):
                return Call(tok.value, self.arguments(), tok.line, tok.column)
            return Name(tok.value, tok.line, tok.column)
        if tok.kind == "OP" and tok.value == "(":
            self.advance()
            self._nest(tok)
            inner = self.expression()
            self.depth -= 1
            self.expect("OP", ")")
            return inner
        shown = "end of line" if tok.kind == "EOL" else repr(tok.value)
        raise _SyntaxIssue(f"expected an expression, found {shown}", tok)

    def arguments(self) -> Tuple[Expr, ...]:
        open_tok = self.expect("OP", "(")
        self._nest(open_tok)
        args: List[Expr] = []
        if not self.check("OP", ")"):
            args.append(self.expression())
            while self.match("OP", ","):
                args.append(self.expression())
        self.expect("OP", ")")
        self.depth -= 1
        return tuple(args)


@dataclass
class _Body:
    """Mutable accumulator for one scenario block"""

    name: str
    line: int = 1
    column: int = 1
    params: List[ParamDecl] = field(default_factory=list)
    agents: List[AgentDecl] = field(default_factory=list)
    subs: List["_Body"] = field(default_factory=list)
    composition: Optional[CompositionSpec] = None
    requirements: List[Expr] = field(default_factory=list)
    max_time: Optional[Expr] = None
    predicate: Optional[Expr] = None
    map_ref: Optional[str] = None
    weather: Optional[str] = None
    route: Tuple[Expr, ...] = ()

    def build(self) -> ScenarioProgram:
        return ScenarioProgram(
            name=self.name,
            params=tuple(self.params),
            agents=tuple(self.agents),
            subscenarios=tuple(sub.build() for sub in self.subs),
            composition=self.composition,
            requirements=tuple(self.requirements),
            termination=TerminationSpec(self.max_time, self.predicate),
            map_ref=self.map_ref,
            weather=self.weather,
            route=self.route,
            line=self.line,
            column=self.column,
        )


class Parser:
    """
    Builds a ScenarioProgram from source text

    Use ``parse_with_diagnostics`` or ``parse`` rather than this class.
    """

    def __init__(self, source: str, name: str = "main"):
        self.name = name
        self.lines, self.diagnostics = tokenize(source)
        self.index = 0

    def error(self, message: str, line: int, column: int, kind: DiagnosticKind = DiagnosticKind.SYNTAX) -> None:
        self.diagnostics.append(Diagnostic(kind, message, line, column))

    def parse(self) -> ScenarioProgram:
        top = _Body(self.name)
        self._block(top, depth=0, opener=None)
        return top.build()

    # Blocks
    def _block(self, body: _Body, depth: int, opener: Optional[Token]) -> None:
        while self.index < len(self.lines):
            tokens = self.lines[self.index]
            self.index += 1
            first = tokens[0]
            cursor = _LineParser(tokens)
            try:
                if first.kind == "NAME" and first.value == "end":
                    cursor.advance()
                    cursor.end_of_line()
                    if depth == 0:
                        self.error("'end' without an open block", first.line, first.column)
                        continue
                    return
                if first.kind == "NAME" and first.value == "scenario":
                    self._scenario(cursor, body, depth)
                elif first.kind == "NAME" and first.value == "compose":
                    self._compose(cursor, body)
                else:
                    self._statement(cursor, body, depth)
            except _SyntaxIssue as issue:
                self.error(issue.message, issue.token.line, issue.token.column, issue.kind)
        if opener is not None:
            self.error(f"block opened at line {opener.line} is missing 'end'", opener.line, opener.column)

    def _skip_block(self) -> None:
        """Consume lines up to the matching 'end' of a rejected block"""
        depth = 1
        while self.index < len(self.lines) and depth:
            first = self.lines[self.index][0]
            self.index += 1
            if first.kind == "NAME" and first.value in ("scenario", "compose"):
                depth += 1
            elif first.kind == "NAME" and first.value == "end":
                depth -= 1

    def _scenario(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        opener = cursor.keyword("scenario")
        name = cursor.identifier("scenario name")
        cursor.expect("OP", ":")
        cursor.end_of_line()
        if depth > 0:
            self._skip_block()
            raise _SyntaxIssue("nested scenario blocks are not supported", opener)
        sub = _Body(name.value, opener.line, opener.column)
        self._block(sub, depth + 1, opener)
        body.subs.append(sub)

    def _compose(self, cursor: _LineParser, body: _Body) -> None:
        opener = cursor.keyword("compose")
        mode = cursor.identifier("composition mode")
        cursor.expect("OP", ":")
        cursor.end_of_line()
        entries: List[CompositionEntry] = []
        closed = False
        while self.index < len(self.lines):
            tokens = self.lines[self.index]
            self.index += 1
            line = _LineParser(tokens)
            try:
                if line.check("NAME", "end"):
                    line.advance()
                    line.end_of_line()
                    closed = True
                    break
                entries.append(self._entry(line))
            except _SyntaxIssue as issue:
                self.error(issue.message, issue.token.line, issue.token.column, issue.kind)
        if not closed:
            self.error(f"block opened at line {opener.line} is missing 'end'", opener.line, opener.column)
        if mode.value not in COMPOSITION_MODES:
            raise _SyntaxIssue(
                f"unknown composition mode '{mode.value}' (expected one of {', '.join(COMPOSITION_MODES)})",
                mode,
                DiagnosticKind.VALUE,
            )
        if body.composition is not None:
            raise _SyntaxIssue("only one compose block is allowed per scenario", opener, DiagnosticKind.VALUE)
        body.composition = CompositionSpec(mode.value, tuple(entries), opener.line, opener.column)

    def _entry(self, cursor: _LineParser) -> CompositionEntry:
        name = cursor.identifier("subscenario name")
        trigger = None
        if cursor.match("NAME", "when"):
            agent = "ego"
            if not cursor.check("NAME", "enters"):
                agent = cursor.identifier("agent name").value
            cursor.keyword("enters")
            trigger = TriggerSpec(region=self._region(cursor), agent=agent)
        cursor.end_of_line()
        return CompositionEntry(name.value, trigger, name.line, name.column)

    def _region(self, cursor: _LineParser) -> RegionExpr:
        kind = cursor.expect("NAME", what="region (lane, intersection, region or circle)")
        if kind.value in ("lane", "intersection", "region"):
            ident = cursor.expect("STRING", what=f"{kind.value} id string")
            return RegionExpr(kind.value, id=ident.value)
        if kind.value == "circle":
            cursor.expect("OP", "(")
            cursor.expect("OP", "(")
            cx = cursor.expression()
            cursor.expect("OP", ",")
            cy = cursor.expression()
            cursor.expect("OP", ")")
            cursor.expect("OP", ",")
            radius = cursor.expression()
            cursor.expect("OP", ")")
            return RegionExpr("circle", center=(cx, cy), radius=radius)
        raise _SyntaxIssue(f"unknown region kind '{kind.value}'", kind)

    # Statements
    def _statement(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        first = cursor.peek()
        if first.kind != "NAME":
            raise _SyntaxIssue("expected a statement", first)
        handler = {
            "param": self._param,
            "ego": self._agent,
            "agent": self._agent,
            "map": self._map,
            "weather": self._weather,
            "route": self._route,
            "require": self._require,
            "terminate": self._terminate,
        }.get(first.value)
        if handler is None:
            raise _SyntaxIssue(f"unknown statement '{first.value}'", first)
        handler(cursor, body, depth)

    def _declared_name(self, cursor: _LineParser, what: str) -> Token:
        tok = cursor.identifier(what)
        if tok.value in RESERVED:
            raise _SyntaxIssue(f"'{tok.value}' is reserved and cannot name a {what}", tok)
        return tok

    def _param(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        cursor.keyword("param")
        name = self._declared_name(cursor, "parameter")
        cursor.expect("OP", "=")
        head = cursor.peek()
        if head.kind == "NAME" and head.value == "uniform" and cursor.check("OP", "(", offset=1):
            cursor.advance()
            args = cursor.arguments()
            if len(args) != 2:
                raise _SyntaxIssue(f"uniform takes 2 arguments, got {len(args)}", head, DiagnosticKind.TYPE)
            dist = UniformContinuous(args[0], args[1])
        elif head.kind == "NAME" and head.value == "choice" and cursor.check("OP", "(", offset=1):
            cursor.advance()
            dist = DiscreteChoice(cursor.arguments())
        else:
            dist = Constant(cursor.expression())
        cursor.end_of_line()
        body.params.append(ParamDecl(name.value, dist, name.line, name.column))

    def _agent(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        head = cursor.advance()
        if head.value == "ego":
            name = head
        else:
            name = self._declared_name(cursor, "agent")
        cursor.expect("OP", "=")
        kind = cursor.expect("NAME", what="agent kind")
        if kind.value not in AGENT_KINDS:
            raise _SyntaxIssue(
                f"unknown agent kind '{kind.value}' (expected one of {', '.join(AGENT_KINDS)})",
                kind,
                DiagnosticKind.VALUE,
            )
        placement = self._placement(cursor)
        speed = None
        behavior = None
        while cursor.match("OP", ","):
            clause = cursor.expect("NAME", what="'speed' or 'behavior'")
            if clause.value == "speed":
                if speed is not None:
                    raise _SyntaxIssue("speed given twice", clause)
                speed = cursor.expression()
            elif clause.value == "behavior":
                if behavior is not None:
                    raise _SyntaxIssue("behavior given twice", clause)
                behavior = self._behavior(cursor)
            else:
                raise _SyntaxIssue(f"unknown agent clause '{clause.value}'", clause)
        cursor.end_of_line()
        body.agents.append(AgentDecl(name.value, kind.value, placement, speed, behavior, name.line, name.column))

    def _placement(self, cursor: _LineParser):
        if cursor.match("NAME", "on"):
            cursor.keyword("lane")
            lane = cursor.expression()
            cursor.keyword("at")
            offset = cursor.expression()
            if cursor.match("NAME", "offset"):
                side = cursor.expect("NAME", what="'left' or 'right'")
                if side.value not in ("left", "right"):
                    raise _SyntaxIssue("expected 'left' or 'right'", side)
                return LanePlacement(lane, offset, cursor.expression(), side.value)
            return LanePlacement(lane, offset)
        if cursor.match("NAME", "at"):
            cursor.expect("OP", "(")
            x = cursor.expression()
            cursor.expect("OP", ",")
            y = cursor.expression()
            cursor.expect("OP", ")")
            cursor.keyword("heading")
            return PosePlacement(x, y, cursor.expression())
        raise _SyntaxIssue("expected placement 'on lane ... at ...' or 'at (x, y) heading ...'", cursor.peek())

    def _behavior(self, cursor: _LineParser) -> BehaviorCall:
        name = cursor.identifier("behavior name")
        cursor.expect("OP", "(")
        args: List[Tuple[str, Expr]] = []
        if not cursor.check("OP", ")"):
            while True:
                key = cursor.identifier("argument name")
                cursor.expect("OP", "=")
                args.append((key.value, cursor.expression()))
                if not cursor.match("OP", ","):
                    break
        cursor.expect("OP", ")")
        return BehaviorCall(name.value, tuple(args), name.line, name.column)

    def _map(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        head = cursor.keyword("map")
        ref = cursor.expect("STRING", what="map path string")
        cursor.end_of_line()
        if depth > 0:
            raise _SyntaxIssue("map may only be declared at top level", head, DiagnosticKind.VALUE)
        if body.map_ref is not None:
            raise _SyntaxIssue("map declared twice", head, DiagnosticKind.VALUE)
        body.map_ref = ref.value

    def _weather(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        head = cursor.keyword("weather")
        tag = cursor.expect("STRING", what="weather tag string")
        cursor.end_of_line()
        if body.weather is not None:
            raise _SyntaxIssue("weather declared twice", head, DiagnosticKind.VALUE)
        body.weather = tag.value

    def _route(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        head = cursor.keyword("route")
        lanes = [cursor.expression()]
        while cursor.match("OP", ","):
            lanes.append(cursor.expression())
        cursor.end_of_line()
        if depth > 0:
            raise _SyntaxIssue("route may only be declared at top level", head, DiagnosticKind.VALUE)
        if body.route:
            raise _SyntaxIssue("route declared twice", head, DiagnosticKind.VALUE)
        body.route = tuple(lanes)

    def _require(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        cursor.keyword("require")
        expr = cursor.expression()
        cursor.end_of_line()
        body.requirements.append(expr)

    def _terminate(self, cursor: _LineParser, body: _Body, depth: int) -> None:
        head = cursor.keyword("terminate")
        mode = cursor.expect("NAME", what="'after' or 'when'")
        if mode.value not in ("after", "when"):
            raise _SyntaxIssue("expected 'after' or 'when'", mode)
        expr = cursor.expression()
        cursor.end_of_line()
        if mode.value == "after":
            if body.max_time is not None:
                raise _SyntaxIssue("terminate after declared twice", head, DiagnosticKind.VALUE)
            body.max_time = expr
        else:
            if body.predicate is not None:
                raise _SyntaxIssue("terminate when declared twice", head, DiagnosticKind.VALUE)
            body.predicate = expr


# Semantic checks


class VType(Enum):
    NUM = "number"
    STR = "string"
    BOOL = "boolean"
    AGENT = "agent"
    ANY = "any"


_FUNCTIONS = {
    "distance": ((VType.AGENT, VType.AGENT), VType.NUM),
    "speed": ((VType.AGENT,), VType.NUM),
    "abs": ((VType.NUM,), VType.NUM),
    "sqrt": ((VType.NUM,), VType.NUM),
    "min": (None, VType.NUM),
    "max": (None, VType.NUM),
}


@dataclass
class _Symbol:
    kind: str  # "param" or "agent"
    vtype: VType
    constant: bool = False
    value: Any = None


class _NotConstant(Exception):
    pass


class _Scope:
    def __init__(self, name: str, parent: Optional["_Scope"] = None):
        self.name = name
        self.parent = parent
        self.symbols: Dict[str, _Symbol] = {}
        self.children: Dict[str, "_Scope"] = {}

    def local(self, name: str) -> Optional[_Symbol]:
        if name in self.symbols:
            return self.symbols[name]
        head, dot, rest = name.partition(".")
        if dot and head in self.children:
            return self.children[head].local(rest)
        return None

    def lookup(self, name: str) -> Optional[_Symbol]:
        scope: Optional[_Scope] = self
        while scope is not None:
            found = scope.local(name)
            if found is not None:
                return found
            scope = scope.parent
        return None


def _where(node: Any, fallback: Any = None) -> Tuple[int, int]:
    line = getattr(node, "line", 0) or getattr(fallback, "line", 0)
    column = getattr(node, "column", 0) or getattr(fallback, "column", 0)
    return line, column


class Checker:
    """Name, type and value checks over a parsed program"""

    def __init__(self):
        self.diagnostics: List[Diagnostic] = []

    def error(self, kind: DiagnosticKind, message: str, node: Any, fallback: Any = None) -> None:
        line, column = _where(node, fallback)
        self.diagnostics.append(Diagnostic(kind, message, line, column))

    def warn(self, message: str, node: Any) -> None:
        line, column = _where(node)
        self.diagnostics.append(
            Diagnostic(DiagnosticKind.VALUE, message, line, column, severity=ValidationSeverity.WARNING)
        )

    def check(self, prog: ScenarioProgram) -> List[Diagnostic]:
        root = _Scope(prog.name)
        self._declare(prog, root, top=True)
        self._check_scope(prog, root)
        self._check_ego(prog)
        return self.diagnostics

    # Declarations
    def _declare(self, prog: ScenarioProgram, scope: _Scope, top: bool) -> None:
        for param in prog.params:
            if param.name in scope.symbols:
                self.error(DiagnosticKind.VALUE, f"duplicate declaration of '{param.name}'", param)
                continue
            scope.symbols[param.name] = self._check_param(param, scope)
        for agent in prog.agents:
            if agent.name in scope.symbols:
                self.error(DiagnosticKind.VALUE, f"duplicate declaration of '{agent.name}'", agent)
                continue
            scope.symbols[agent.name] = _Symbol("agent", VType.AGENT)
        for sub in prog.subscenarios:
            if sub.name in scope.children:
                self.error(DiagnosticKind.VALUE, f"duplicate subscenario '{sub.name}'", sub)
                continue
            child = _Scope(sub.name, scope)
            scope.children[sub.name] = child
            self._declare(sub, child, top=False)

    def _constant(self, expr: Expr, scope: _Scope) -> Any:
        def lookup(name: str) -> Any:
            sym = scope.lookup(name)
            if sym is None or not sym.constant:
                raise _NotConstant(name)
            return sym.value

        return evaluate(expr, lookup)

    def _try_constant(self, expr: Expr, scope: _Scope, what: str) -> Tuple[bool, Any]:
        """(is_constant, value); evaluation failures are reported"""
        try:
            return True, self._constant(expr, scope)
        except _NotConstant:
            return False, None
        except ExpressionError as e:
            self.error(DiagnosticKind.VALUE, f"{what}: {e}", expr)
            return True, None

    def _check_param(self, param: ParamDecl, scope: _Scope) -> _Symbol:
        dist = param.dist
        if isinstance(dist, UniformContinuous):
            bounds = []
            for label, expr in (("lower", dist.lo), ("upper", dist.hi)):
                vtype = self.infer(expr, scope)
                if vtype == VType.ANY:
                    return _Symbol("param", VType.NUM)
                if vtype != VType.NUM:
                    self.error(DiagnosticKind.TYPE, f"uniform {label} bound must be a number", expr, param)
                    return _Symbol("param", VType.NUM)
                is_const, value = self._try_constant(expr, scope, f"uniform {label} bound")
                if not is_const:
                    self.error(DiagnosticKind.TYPE, f"uniform {label} bound must be constant", expr, param)
                    return _Symbol("param", VType.NUM)
                if value is None:
                    return _Symbol("param", VType.NUM)
                bounds.append(value)
            lo, hi = bounds
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                self.error(
                    DiagnosticKind.VALUE,
                    f"uniform bounds of '{param.name}' must satisfy lo < hi (got {lo!r}, {hi!r})",
                    param,
                )
            return _Symbol("param", VType.NUM)

        if isinstance(dist, DiscreteChoice):
            if not dist.values:
                self.error(DiagnosticKind.VALUE, f"choice set of '{param.name}' is empty", param)
                return _Symbol("param", VType.ANY)
            types = set()
            seen: List[Any] = []
            for expr in dist.values:
                vtype = self.infer(expr, scope)
                if vtype == VType.ANY:
                    continue
                if vtype not in (VType.NUM, VType.STR):
                    self.error(DiagnosticKind.TYPE, "choice values must be numbers or strings", expr, param)
                    continue
                types.add(vtype)
                is_const, value = self._try_constant(expr, scope, "choice value")
                if not is_const:
                    self.error(DiagnosticKind.TYPE, "choice values must be constant", expr, param)
                    continue
                if value is not None and value in seen:
                    self.error(DiagnosticKind.VALUE, f"duplicate choice value {value!r}", expr, param)
                seen.append(value)
            if len(types) > 1:
                self.error(DiagnosticKind.TYPE, f"choice values of '{param.name}' mix types", param)
                return _Symbol("param", VType.ANY)
            return _Symbol("param", types.pop() if types else VType.ANY)

        vtype = self.infer(dist.value, scope)
        if vtype == VType.ANY:
            return _Symbol("param", VType.ANY)
        is_const, value = self._try_constant(dist.value, scope, f"parameter '{param.name}'")
        if not is_const:
            self.error(
                DiagnosticKind.TYPE,
                f"parameter '{param.name}' must be constant or use uniform/choice",
                dist.value,
                param,
            )
            return _Symbol("param", vtype)
        return _Symbol("param", vtype, constant=value is not None, value=value)

    # Expressions
    def infer(
        self,
        expr: Expr,
        scope: _Scope,
        allow_time: bool = False,
    ) -> VType:
        if isinstance(expr, Num):
            return VType.NUM
        if isinstance(expr, Str):
            return VType.STR
        if isinstance(expr, Name):
            if expr.id == "pi":
                return VType.NUM
            if expr.id == "time":
                if not allow_time:
                    self.error(DiagnosticKind.NAME, "'time' is only available in 'terminate when'", expr)
                    return VType.ANY
                return VType.NUM
            sym = scope.lookup(expr.id)
            if sym is None:
                self.error(DiagnosticKind.NAME, f"undeclared identifier '{expr.id}'", expr)
                return VType.ANY
            return sym.vtype
        if isinstance(expr, Call):
            return self._infer_call(expr, scope, allow_time)
        if isinstance(expr, Unary):
            operand = self.infer(expr.operand, scope, allow_time)
            wanted = VType.BOOL if expr.op == "not" else VType.NUM
            self._require(operand, wanted, expr, f"operand of '{expr.op}'")
            return wanted
        if isinstance(expr, Binary):
            left = self.infer(expr.left, scope, allow_time)
            right = self.infer(expr.right, scope, allow_time)
            if expr.op in ("and", "or"):
                self._require(left, VType.BOOL, expr.left, f"operand of '{expr.op}'")
                self._require(right, VType.BOOL, expr.right, f"operand of '{expr.op}'")
                return VType.BOOL
            if expr.op in ("==", "!="):
                if VType.ANY not in (left, right) and (left != right or left not in (VType.NUM, VType.STR)):
                    self.error(DiagnosticKind.TYPE, f"cannot compare {left.value} with {right.value}", expr)
                return VType.BOOL
            self._require(left, VType.NUM, expr.left, f"operand of '{expr.op}'")
            self._require(right, VType.NUM, expr.right, f"operand of '{expr.op}'")
            return VType.BOOL if expr.op in COMPARISON_OPS else VType.NUM
        return VType.ANY

    def _infer_call(self, expr: Call, scope: _Scope, allow_time: bool) -> VType:
        spec = _FUNCTIONS.get(expr.func)
        arg_types = [self.infer(a, scope, allow_time) for a in expr.args]
        if spec is None:
            self.error(DiagnosticKind.NAME, f"unknown function '{expr.func}'", expr)
            return VType.ANY
        params, result = spec
        if params is None:
            if not expr.args:
                self.error(DiagnosticKind.TYPE, f"{expr.func}() needs at least one argument", expr)
            for arg, vtype in zip(expr.args, arg_types):
                self._require(vtype, VType.NUM, arg, f"argument of {expr.func}()")
            return result
        if len(params) != len(expr.args):
            self.error(
                DiagnosticKind.TYPE,
                f"{expr.func}() takes {len(params)} argument(s), got {len(expr.args)}",
                expr,
            )
            return result
        for arg, vtype, wanted in zip(expr.args, arg_types, params):
            self._require(vtype, wanted, arg, f"argument of {expr.func}()")
        return result

    def _require(self, got: VType, wanted: VType, node: Any, what: str, fallback: Any = None) -> bool:
        if got in (wanted, VType.ANY):
            return True
        self.error(DiagnosticKind.TYPE, f"{what} must be a {wanted.value}, got {got.value}", node, fallback)
        return False

    def expect(self, expr: Expr, wanted: VType, scope: _Scope, what: str, fallback: Any = None, allow_time=False):
        got = self.infer(expr, scope, allow_time=allow_time)
        self._require(got, wanted, expr, what, fallback)
        return got

    # Scope bodies
    def _check_scope(self, prog: ScenarioProgram, scope: _Scope) -> None:
        for agent in prog.agents:
            self._check_agent(agent, scope)
        for req in prog.requirements:
            self.expect(req, VType.BOOL, scope, "requirement")
        for lane in prog.route:
            self.expect(lane, VType.STR, scope, "route lane id")
        term = prog.termination
        if term.max_time is not None:
            if self.expect(term.max_time, VType.NUM, scope, "terminate after") == VType.NUM:
                is_const, value = self._try_constant(term.max_time, scope, "terminate after")
                if not is_const:
                    self.error(DiagnosticKind.TYPE, "terminate after must be constant", term.max_time)
                elif value is not None and not (math.isfinite(value) and value > 0):
                    self.error(DiagnosticKind.VALUE, f"terminate after must be > 0, got {value!r}", term.max_time)
        if term.predicate is not None:
            self.expect(term.predicate, VType.BOOL, scope, "terminate when", allow_time=True)
        self._check_composition(prog, scope)
        for sub in prog.subscenarios:
            child = scope.children.get(sub.name)
            if child is not None:
                self._check_scope(sub, child)

    def _check_agent(self, agent: AgentDecl, scope: _Scope) -> None:
        placement = agent.placement
        if isinstance(placement, LanePlacement):
            self.expect(placement.lane, VType.STR, scope, "lane id", agent)
            self.expect(placement.offset, VType.NUM, scope, "lane offset", agent)
            if placement.lateral is not None:
                self.expect(placement.lateral, VType.NUM, scope, "lateral offset", agent)
        else:
            for label, expr in (("x", placement.x), ("y", placement.y), ("heading", placement.heading)):
                self.expect(expr, VType.NUM, scope, f"placement {label}", agent)
        if agent.speed is not None:
            if self.expect(agent.speed, VType.NUM, scope, "speed", agent) == VType.NUM:
                is_const, value = self._try_constant(agent.speed, scope, "speed")
                if is_const and value is not None and value < 0:
                    self.error(DiagnosticKind.VALUE, f"speed must be >= 0, got {value!r}", agent.speed, agent)
        if agent.behavior is not None:
            self._check_behavior(agent, agent.behavior, scope)

    def _check_behavior(self, agent: AgentDecl, call: BehaviorCall, scope: _Scope) -> None:
        cls = BEHAVIORS.get(call.name)
        if cls is None:
            self.error(DiagnosticKind.NAME, f"unknown behavior '{call.name}'", call)
            return
        if agent.kind not in cls.kinds:
            self.error(DiagnosticKind.TYPE, f"behavior {call.name} does not apply to a {agent.kind}", call)
        given = set()
        for key, expr in call.args:
            arg = cls.arg(key)
            if arg is None:
                self.error(DiagnosticKind.NAME, f"{call.name} has no argument '{key}'", expr, call)
                continue
            if key in given:
                self.error(DiagnosticKind.VALUE, f"argument '{key}' given twice", expr, call)
                continue
            given.add(key)
            wanted = VType.NUM if arg.type == "num" else VType.STR
            if self.expect(expr, wanted, scope, f"{call.name} argument '{key}'", call) != wanted:
                continue
            is_const, value = self._try_constant(expr, scope, f"{call.name} argument '{key}'")
            if not is_const or value is None:
                continue
            if wanted == VType.NUM and arg.nonnegative and value < 0:
                self.error(DiagnosticKind.VALUE, f"{call.name} argument '{key}' must be >= 0, got {value!r}", expr, call)
            if key == "leader" and value and scope.lookup(value) is None:
                self.error(DiagnosticKind.NAME, f"leader '{value}' is not a declared agent", expr, call)
        for arg in cls.signature:
            if arg.required and arg.name not in given:
                self.error(DiagnosticKind.TYPE, f"{call.name} is missing required argument '{arg.name}'", call)

    def _check_composition(self, prog: ScenarioProgram, scope: _Scope) -> None:
        comp = prog.composition
        listed = set()
        for entry in comp.entries if comp is not None else ():
            sub = prog.subscenario(entry.name)
            if sub is None:
                self.error(DiagnosticKind.NAME, f"unknown subscenario '{entry.name}'", entry)
                continue
            if entry.name in listed:
                self.error(DiagnosticKind.VALUE, f"subscenario '{entry.name}' composed twice", entry)
            listed.add(entry.name)
            if comp.mode == "opportunistic" and entry.trigger is None:
                self.error(DiagnosticKind.VALUE, f"opportunistic entry '{entry.name}' needs a trigger", entry)
            if comp.mode != "opportunistic" and entry.trigger is not None:
                self.error(DiagnosticKind.VALUE, f"{comp.mode} entry '{entry.name}' cannot carry a trigger", entry)
            if comp.mode == "sequential" and sub.termination.max_time is None:
                self.error(
                    DiagnosticKind.VALUE,
                    f"sequential entry '{entry.name}' needs 'terminate after' in its subscenario",
                    entry,
                )
            if entry.trigger is not None:
                self._check_trigger(entry, scope)
        for sub in prog.subscenarios:
            if sub.name not in listed:
                self.warn(f"subscenario '{sub.name}' is not composed and runs in parallel", sub)

    def _check_trigger(self, entry: CompositionEntry, scope: _Scope) -> None:
        trigger = entry.trigger
        sym = scope.lookup(trigger.agent) if trigger.agent != "ego" else _Symbol("agent", VType.AGENT)
        if sym is None or sym.kind != "agent":
            self.error(DiagnosticKind.NAME, f"trigger agent '{trigger.agent}' is not a declared agent", entry)
        region = trigger.region
        if region.kind != "circle":
            return
        for label, expr in (("x", region.center[0]), ("y", region.center[1]), ("radius", region.radius)):
            if self.expect(expr, VType.NUM, scope, f"circle {label}", entry) != VType.NUM:
                continue
            is_const, value = self._try_constant(expr, scope, f"circle {label}")
            if not is_const:
                self.error(DiagnosticKind.TYPE, f"circle {label} must be constant", expr, entry)
            elif label == "radius" and value is not None and not value > 0:
                self.error(DiagnosticKind.VALUE, f"circle radius must be > 0, got {value!r}", expr, entry)

    def _check_ego(self, prog: ScenarioProgram) -> None:
        egos = [a for a in prog.agents if a.is_ego]
        for extra in egos[1:]:
            self.error(DiagnosticKind.VALUE, "at most one agent may be the ego", extra)
        for sub in prog.subscenarios:
            for agent in sub.agents:
                if agent.is_ego:
                    self.error(DiagnosticKind.VALUE, "the ego must be declared at top level", agent)


def parse_with_diagnostics(source: str, name: str = "main") -> ParseResult:
    """
    Parse and check ``source``; never raises

    Returns:
        ParseResult whose program is None when any error diagnostic exists
    """
    try:
        parser = Parser(source, name=name)
        program = parser.parse()
        diagnostics = list(parser.diagnostics)
        if not has_errors(diagnostics):
            diagnostics.extend(Checker().check(program))
    except RecursionError:
        return ParseResult(None, [Diagnostic(DiagnosticKind.SYNTAX, "program nested too deeply", 1, 1)])
    diagnostics.sort(key=lambda d: (d.line, d.column))
    if has_errors(diagnostics):
        return ParseResult(None, diagnostics)
    return ParseResult(program, diagnostics)


def parse(source: str, name: str = "main", path: Optional[str] = None) -> ScenarioProgram:
    """
    Parse ``source`` into a validated ScenarioProgram

    Raises:
        ScenarioParseError: carrying every error diagnostic
    """
    result = parse_with_diagnostics(source, name=name)
    if result.program is None:
        raise ScenarioParseError([d for d in result.diagnostics if d.is_error], path=path)
    for warning in result.diagnostics:
        logger.warning(f"{path or name}: {warning}")
    return result.program


def parse_file(path: Union[str, Path]) -> ScenarioProgram:
    path = Path(path)
    try:
        source = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ScenarioParseError(
            [Diagnostic(DiagnosticKind.SYNTAX, f"cannot read scenario: {e}", 0, 0)], path=str(path)
        )
    return parse(source, name=path.stem, path=str(path))
