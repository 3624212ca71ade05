"""
Tests for conceptual and objective documents
File: tests/test_documents.py
"""

import pytest

from abm.nodes import ScheduleKind
from errors import DocumentSyntaxError, SchemaError
from representation.documents import (
    load_conceptual, load_objective, parse_conceptual, parse_objective, render_conceptual, render_objective,
)

SCENARIO = """{
  "objects": [
    {
      "name": "p",
      "states": [{"name": "x", "description": "a counter", "type": "int"}],
      "activities": [{"name": "go", "description": "counts up"}]
    }
  ],
  "scheduling": [
    {"kind": "Do", "object": "p", "activity": "go"}
  ]
}
"""


def test_every_corpus_scenario_loads(corpus_dir):
    for path in sorted(corpus_dir.glob("*/scenario.json")):
        rep = load_conceptual(path)
        assert rep.declared_activities(), path.parent.name
        assert parse_conceptual(render_conceptual(rep)) == rep


def test_epidemic_documents(epidemic_scenario, epidemic_objective):
    assert epidemic_scenario.declared_activities() == [
        ("person", "move"), ("person", "spread"), ("person", "get_immune"),
    ]
    assert epidemic_scenario.scheduling[1].schedule_kind is ScheduleKind.CONDITIONAL_DO
    assert epidemic_scenario.activity_description("person", "fly") is None
    assert epidemic_scenario.parameters["population"] == 25
    assert [c.variable_name for c in epidemic_objective.criteria] == ["spread_rate", "spread_distance"]
    assert parse_objective(render_objective(epidemic_objective)) == epidemic_objective


def test_minimal_scenario():
    rep = parse_conceptual(SCENARIO)
    assert rep.activity_description("p", "go") == "counts up"
    assert rep.parameters == {}


def test_bytes_are_accepted():
    assert parse_conceptual(SCENARIO.encode("utf-8")) == parse_conceptual(SCENARIO)


def test_malformed_json_reports_its_line():
    with pytest.raises(DocumentSyntaxError) as info:
        parse_conceptual('{\n  "objects": [,]\n}\n')
    assert info.value.path == "$"
    assert info.value.line == 2


def test_non_utf8_bytes_are_a_syntax_error(tmp_path):
    with pytest.raises(DocumentSyntaxError) as info:
        parse_objective(b'{\n  "problem": "caf\xe9"\n}\n')
    assert info.value.line == 2
    assert "UTF-8" in info.value.message

    path = tmp_path / "latin1.json"
    path.write_bytes(SCENARIO.replace("a counter", "compteur \u00e9").encode("latin-1"))
    with pytest.raises(DocumentSyntaxError):
        load_conceptual(path)


def test_dangling_schedule_reference():
    with pytest.raises(SchemaError) as info:
        parse_conceptual(SCENARIO.replace('"activity": "go"}', '"activity": "run"}'))
    assert info.value.path == "$.scheduling[0].activity"
    assert info.value.line == 10
    assert "p.run" in info.value.message


def test_unknown_state_type():
    with pytest.raises(SchemaError) as info:
        parse_conceptual(SCENARIO.replace('"type": "int"', '"type": "float"'))
    assert info.value.path == "$.objects[0].states[0].type"
    assert info.value.line == 5


@pytest.mark.parametrize("entry", [
    '{"kind": "Do", "object": "p", "activity": "go", "condition": "always"}',
    '{"kind": "Conditional_Do", "object": "p", "activity": "go"}',
    '{"kind": "Conditional_Do", "object": "p", "activity": "go", "condition": "  "}',
])
def test_condition_must_match_kind(entry):
    with pytest.raises(SchemaError) as info:
        parse_conceptual(SCENARIO.replace('{"kind": "Do", "object": "p", "activity": "go"}', entry))
    assert info.value.path == "$.scheduling[0]"
    assert info.value.line == 10


def test_duplicate_names():
    doubled = SCENARIO.replace(
        '[{"name": "go", "description": "counts up"}]',
        '[{"name": "go", "description": "counts up"}, {"name": "go", "description": "again"}]')
    with pytest.raises(SchemaError) as info:
        parse_conceptual(doubled)
    assert info.value.path == "$.objects[0].activities[1].name"
    assert "duplicate activity p.go" in info.value.message


def test_one_position_state_per_object():
    two = SCENARIO.replace(
        '[{"name": "x", "description": "a counter", "type": "int"}]',
        '[{"name": "a", "description": "here", "type": "position"}, '
        '{"name": "b", "description": "there", "type": "position"}]')
    with pytest.raises(SchemaError) as info:
        parse_conceptual(two)
    assert info.value.path == "$.objects[0].states[1].type"


@pytest.mark.parametrize("value", ['"25"', "true", "null"])
def test_parameters_must_be_numbers(value):
    with pytest.raises(SchemaError):
        parse_conceptual(SCENARIO.replace('\n  ]\n}', f'\n  ],\n  "parameters": {{"n": {value}}}\n}}'))


def test_identifiers_are_checked():
    with pytest.raises(SchemaError) as info:
        parse_conceptual(SCENARIO.replace('"name": "x"', '"name": "two words"'))
    assert info.value.path == "$.objects[0].states[0].name"


def test_objective_needs_criteria():
    with pytest.raises(SchemaError) as info:
        parse_objective('{"problem": "too many infections", "criteria": []}')
    assert info.value.path == "$.criteria"
    assert info.value.line == 1


def test_objective_example_may_be_any_json(epidemic_dir):
    objective = parse_objective(
        '{"problem": "p", "criteria": [{"variable_name": "v", "variable_example": [1, 2], "requirement": "r"}]}')
    assert objective.criteria[0].variable_example == [1, 2]
    assert load_objective(epidemic_dir / "objective.json").criteria[0].variable_example == 0.08
