"""
Tests for modification directives
File: tests/test_patch.py
"""

import pytest
from pydantic import ValidationError

from abm.parser import parse_program, parse_syntax
from abm.patch import Directive, apply_patch, patch_program
from errors import PatchError, PreconditionError
from services.generator_service import PromptKind, parse_response
from simulation.engine import simulate
from verification.level1 import check_program
from verification.slicing import backward_slice


@pytest.fixture
def tiny(tiny_source):
    return parse_program(tiny_source)


def test_epidemic_fix_applies_cleanly(epidemic_dir, epidemic_source):
    raw = (epidemic_dir / "fixtures" / "modify.txt").read_text(encoding="utf-8")
    directives = parse_response(PromptKind.MODIFY, raw).directives
    source = apply_patch(parse_program(epidemic_source), directives)
    assert check_program(source) == []
    assert "activity quarantine" in source
    trace = simulate(source, 0, 20)
    assert trace.series["spread_rate"] == [0.08] * 20
    assert trace.series["spread_distance"] == [4] * 20


def test_schedule_insertion_index(tiny):
    program = patch_program(tiny, [
        Directive(op="add_activity", object="person", name="rest", body="pos := pos"),
        Directive(op="add_schedule", kind="Do", object="person", activity="rest", index=0),
    ])
    assert [s.activity_name for s in program.schedule] == ["rest", "spread"]
    assert program.schedule[0].kind.value == "do"


def test_remove_activity_takes_its_schedule_steps(tiny):
    program = patch_program(tiny, [Directive(op="remove_activity", object="person", name="spread")])
    assert program.schedule == ()
    assert program.object("person").activity("spread") is None


def test_set_parameter_replaces_and_adds(epidemic_source):
    program = patch_program(parse_program(epidemic_source), [
        Directive(op="set_parameter", name="spread_distance", value=2),
        Directive(op="set_parameter", name="alpha", value=0.5),
    ])
    assert program.parameters["spread_distance"] == 2
    assert [p.name for p in program.params][0] == "alpha"


def test_patch_may_leave_defects_for_repair(tiny):
    source = apply_patch(tiny, [Directive(op="replace_activity", object="person", name="spread",
                                          body="infected := unknown_state")])
    defects = check_program(source)
    assert [d.excerpt for d in defects] == ["unknown_state"]


@pytest.mark.parametrize("directive, message", [
    (Directive(op="add_state", object="person", name="infected", type="bool", default="true"), "already exists"),
    (Directive(op="add_state", object="ghost", name="x", type="int", default="0"), "unknown object"),
    (Directive(op="remove_state", object="person", name="nope"), "no such state"),
    (Directive(op="replace_activity", object="person", name="fly", body="todo"), "no such activity"),
    (Directive(op="add_activity", object="person", name="spread", body="todo"), "already exists"),
    (Directive(op="add_activity", object="person", name="bad", body="x := := 1"), "does not parse"),
    (Directive(op="add_schedule", kind="do", object="person", activity="spread", index=5), "out of range"),
    (Directive(op="add_schedule", kind="conditional_do", object="person", activity="spread",
               condition="infected and"), "does not parse"),
    (Directive(op="remove_schedule", object="person", activity="fly"), "no such schedule step"),
])
def test_inapplicable_directives(tiny, directive, message):
    with pytest.raises(PatchError, match=message):
        patch_program(tiny, [directive])


def test_directives_apply_in_order(tiny):
    with pytest.raises(PatchError):
        patch_program(tiny, [
            Directive(op="remove_state", object="person", name="infected"),
            Directive(op="remove_state", object="person", name="infected"),
        ])


@pytest.mark.parametrize("fields", [
    {"op": "add_state", "object": "person", "name": "x", "type": "int"},
    {"op": "add_state", "object": "person", "name": "x", "type": "float", "default": "0"},
    {"op": "set_parameter", "name": "rate"},
    {"op": "add_schedule", "kind": "sometimes", "object": "person", "activity": "spread"},
    {"op": "remove_state", "object": "two words", "name": "x"},
    {"op": "rename_state", "object": "person", "name": "x"},
    {"op": "remove_state", "object": "person", "name": "x", "colour": "red"},
])
def test_directive_validation(fields):
    with pytest.raises(ValidationError):
        Directive(**fields)


def test_directive_kind_is_normalised_and_described():
    directive = Directive(op="add_schedule", kind=" Random_Conditional_Do ", object="person",
                          activity="spread", condition="infected")
    assert directive.kind == "random_conditional_do"
    assert directive.describe() == "add_schedule person.spread"
    assert not directive.is_structural
    assert Directive(op="set_parameter", name="rate", value=1).describe() == "set_parameter rate = 1"
    assert Directive(op="add_state", object="p", name="x", type="int", default="0").is_structural


def test_patched_program_simulates_and_slices(epidemic_dir, epidemic_source):
    raw = (epidemic_dir / "fixtures" / "modify.txt").read_text(encoding="utf-8")
    directives = parse_response(PromptKind.MODIFY, raw).directives
    program = patch_program(parse_program(epidemic_source), directives)
    assert program.resolved
    assert simulate(program, 0, 20).series["spread_rate"] == [0.08] * 20

    result = backward_slice(program, "spread_rate")
    assert {("person", "quarantine"), ("person", "vaccinate")} <= result.activities
    assert ("person", "quarantined") in result.states
    assert result.random


def test_edited_tree_is_checked_before_it_runs(tiny, tiny_source):
    raw = parse_syntax(tiny_source).program
    assert not raw.resolved
    assert simulate(raw, 0, 3).to_dict() == simulate(tiny, 0, 3).to_dict()
    assert backward_slice(raw, "infected") == backward_slice(tiny, "infected")


def test_patch_that_breaks_compilation_is_refused(tiny):
    with pytest.raises(PatchError, match="does not compile"):
        patch_program(tiny, [Directive(op="replace_activity", object="person", name="spread",
                                       body="infected := unknown_state")])


def test_broken_tree_cannot_be_simulated_or_sliced(tiny):
    broken = parse_syntax("model m\nrecord r = missing\n").program
    with pytest.raises(PreconditionError):
        simulate(broken, 0, 1)
    with pytest.raises(PreconditionError):
        backward_slice(broken, "r")
