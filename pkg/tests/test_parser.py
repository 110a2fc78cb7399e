from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenfuzz.discovery import BUNDLED_SCENARIOS_DIR
from scenfuzz.exceptions import ScenarioParseError
from scenfuzz.parser import parse, parse_file, parse_with_diagnostics, tokenize
from scenfuzz.scenario import (
    Binary,
    DiscreteChoice,
    LanePlacement,
    Name,
    Num,
    PosePlacement,
    UniformContinuous,
    format_program,
)
from scenfuzz.validators import DiagnosticKind

VALID = """\
map "straight.map"
weather "rain"
param gap = uniform(8, 30)
param lane_id = choice("a", "a_left")
param cruise = 10
ego = car on lane "a" at 10, speed cruise, behavior FollowLane(speed=cruise)
agent lead = car on lane lane_id at 10 + gap offset left 0.5, speed 5
agent walker = pedestrian at (40, -4) heading pi / 2, behavior CrossRoad(distance=8)
require gap > 9 and cruise >= 0
terminate after 5
terminate when time > 4 or distance(ego, lead) < 2
"""


def kinds(source):
    return {d.kind for d in parse_with_diagnostics(source).diagnostics if d.is_error}


class TestParse:
    def test_valid_program(self):
        prog = parse(VALID, name="valid")
        assert prog.name == "valid"
        assert prog.map_ref == "straight.map"
        assert prog.weather == "rain"
        assert [p.name for p in prog.params] == ["gap", "lane_id", "cruise"]
        assert isinstance(prog.params[0].dist, UniformContinuous)
        assert isinstance(prog.params[1].dist, DiscreteChoice)
        assert prog.ego.name == "ego"
        lead = prog.agents[1]
        assert isinstance(lead.placement, LanePlacement)
        assert lead.placement.side == "left"
        assert isinstance(prog.agents[2].placement, PosePlacement)
        assert prog.termination.max_time == Num(5.0)
        assert prog.termination.predicate is not None

    def test_precedence(self):
        prog = parse("param x = 1 + 2 * 3\n")
        expr = prog.params[0].dist.value
        assert isinstance(expr, Binary) and expr.op == "+"
        assert expr.right == Binary("*", Num(2.0), Num(3.0))

    def test_negative_literal_folds(self):
        prog = parse("param x = -5\n")
        assert prog.params[0].dist.value == Num(-5.0)

    def test_comments_and_blank_lines(self):
        prog = parse("# header\n\nparam x = 1  # trailing\n")
        assert prog.params[0].name == "x"

    def test_subscenario_names_are_scoped(self):
        source = """\
ego = car on lane "a" at 10
scenario crossing:
    param gap = uniform(1, 2)
    agent other = car on lane "a" at 20 + gap
end
compose parallel:
    crossing
end
"""
        prog = parse(source)
        assert prog.subscenarios[0].name == "crossing"
        assert prog.subscenarios[0].agents[0].name == "other"
        assert prog.composition.mode == "parallel"

    def test_parse_error_carries_every_diagnostic(self):
        with pytest.raises(ScenarioParseError) as excinfo:
            parse("param = 1\nagent x car\nparam y = 2\n", path="broken.scn")
        assert len(excinfo.value.diagnostics) == 2
        assert [d.line for d in excinfo.value.diagnostics] == [1, 2]
        assert str(excinfo.value).startswith("broken.scn:1:")

    def test_parse_file_missing(self, tmp_path):
        with pytest.raises(ScenarioParseError):
            parse_file(tmp_path / "absent.scn")


class TestDiagnostics:
    def test_unterminated_string(self):
        _, diagnostics = tokenize('map "oops\n')
        assert diagnostics[0].kind == DiagnosticKind.SYNTAX
        assert "unterminated" in diagnostics[0].message

    def test_numeric_overflow(self):
        assert DiagnosticKind.VALUE in kinds("param x = 1e999\n")

    def test_undeclared_identifier(self):
        assert kinds("require missing > 1\n") == {DiagnosticKind.NAME}

    def test_time_outside_termination(self):
        assert DiagnosticKind.NAME in kinds("require time > 1\n")

    def test_requirement_must_be_boolean(self):
        assert DiagnosticKind.TYPE in kinds("param x = uniform(0, 1)\nrequire x + 1\n")

    def test_uniform_bounds_ordered(self):
        assert DiagnosticKind.VALUE in kinds("param x = uniform(3, 1)\n")

    def test_uniform_bounds_constant(self):
        assert DiagnosticKind.TYPE in kinds("param y = uniform(0, 1)\nparam x = uniform(0, y)\n")

    def test_duplicate_choice(self):
        assert DiagnosticKind.VALUE in kinds('param x = choice("a", "a")\n')

    def test_mixed_choice(self):
        assert DiagnosticKind.TYPE in kinds('param x = choice("a", 1)\n')

    def test_unknown_behavior(self):
        assert DiagnosticKind.NAME in kinds('ego = car on lane "a" at 1, behavior Fly()\n')

    def test_behavior_kind_mismatch(self):
        assert DiagnosticKind.TYPE in kinds("ego = pedestrian at (0, 0) heading 0, behavior FollowLane()\n")

    def test_missing_required_argument(self):
        source = 'ego = car on lane "a" at 1\nagent x = car on lane "a" at 20, behavior LaneChange()\n'
        assert DiagnosticKind.TYPE in kinds(source)

    def test_negative_argument(self):
        assert DiagnosticKind.VALUE in kinds('ego = car on lane "a" at 1, behavior Brake(decel=-1)\n')

    def test_unknown_leader(self):
        source = 'ego = car on lane "a" at 1, behavior FollowVehicle(leader="ghost")\n'
        assert DiagnosticKind.NAME in kinds(source)

    def test_negative_speed(self):
        assert DiagnosticKind.VALUE in kinds('ego = car on lane "a" at 1, speed -3\n')

    def test_two_egos(self):
        result = parse_with_diagnostics('ego = car on lane "a" at 1\nego = car on lane "a" at 9\n')
        assert not result.ok

    def test_ego_inside_subscenario(self):
        source = 'scenario s:\n    ego = car on lane "a" at 1\nend\n'
        assert DiagnosticKind.VALUE in kinds(source)

    def test_reserved_name(self):
        assert DiagnosticKind.SYNTAX in kinds("param time = 1\n")

    def test_missing_end(self):
        result = parse_with_diagnostics("scenario s:\n    param x = 1\n")
        assert any("missing 'end'" in d.message for d in result.diagnostics)

    def test_opportunistic_needs_trigger(self):
        source = 'ego = car on lane "a" at 1\nscenario s:\n    param x = 1\nend\ncompose opportunistic:\n    s\nend\n'
        assert DiagnosticKind.VALUE in kinds(source)

    def test_sequential_needs_duration(self):
        source = 'ego = car on lane "a" at 1\nscenario s:\n    param x = 1\nend\ncompose sequential:\n    s\nend\n'
        assert DiagnosticKind.VALUE in kinds(source)

    def test_uncomposed_subscenario_warns(self):
        result = parse_with_diagnostics('ego = car on lane "a" at 1\nscenario s:\n    param x = 1\nend\n')
        assert result.ok
        warnings = [d for d in result.diagnostics if not d.is_error]
        assert [w.message for w in warnings] == ["subscenario 's' is not composed and runs in parallel"]

    def test_chained_comparison(self):
        assert DiagnosticKind.SYNTAX in kinds("param x = 1\nrequire 0 < x < 2\n")

    def test_string_arithmetic_is_rejected(self):
        assert kinds('ego = car on lane "a" at 1, speed "a" + "b"\n')


@pytest.mark.parametrize("path", sorted(BUNDLED_SCENARIOS_DIR.glob("*.scn")), ids=lambda p: p.stem)
def test_bundled_scenarios_print_and_reparse(path):
    prog = parse_file(path)
    assert parse(format_program(prog), name=prog.name) == prog


def test_printed_program_is_stable():
    prog = parse(VALID, name="valid")
    text = format_program(prog)
    assert format_program(parse(text, name="valid")) == text


TOKENS = st.sampled_from(
    [
        "param", "ego", "agent", "=", "uniform", "choice", "(", ")", ",", "car", "pedestrian",
        "on", "lane", "at", "heading", "offset", "left", "speed", "behavior", "FollowLane",
        "require", "terminate", "after", "when", "scenario", "compose", "parallel", "end",
        ":", "and", "or", "not", "<", "+", "-", "*", "/", "1", "2.5", '"a"', "x", "pi", "time",
        "\n", "\n", "#",
    ]
)


@settings(max_examples=200, deadline=None)
@given(st.lists(TOKENS, max_size=40).map(" ".join))
def test_parse_never_raises_on_token_soup(source):
    result = parse_with_diagnostics(source)
    assert result.ok == (result.program is not None)


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_parse_never_raises_on_arbitrary_text(source):
    result = parse_with_diagnostics(source)
    if result.program is None:
        assert any(d.is_error for d in result.diagnostics)


def test_bundled_directory_exists():
    assert Path(BUNDLED_SCENARIOS_DIR).is_dir()
