"""
Tests for verifier-level1 defects and rectification prompts
File: tests/test_level1.py
"""

import random

import pytest

from abm.defects import DefectKind
from abm.parser import parse_program, parse_syntax
from errors import EmptyDefectList
from services.generator_service import PromptKind
from verification.level1 import (
    ABSENT_REASON, EMPTY_REASON, NO_EFFECT_REASON, TODO_REASON, build_rectification_prompt, check_program,
    is_elaborate, is_executable, numbered_source,
)


def test_reference_program_is_clean(epidemic_source, epidemic_scenario):
    assert check_program(epidemic_source, epidemic_scenario) == []


def test_program_object_is_checked_through_its_text(epidemic_source):
    assert check_program(parse_program(epidemic_source)) == []


def test_todo_body_is_a_lacking_detail(epidemic_dir, epidemic_scenario):
    raw = (epidemic_dir / "fixtures" / "gen_abm.txt").read_text(encoding="utf-8")
    source = raw.split("```abm\n", 1)[1].split("```", 1)[0]
    defects = check_program(source, epidemic_scenario)
    assert len(defects) == 1
    defect = defects[0]
    assert defect.kind is DefectKind.LACKING_DETAIL
    assert (defect.object_name, defect.activity_name) == ("person", "get_immune")
    assert defect.reason == TODO_REASON
    assert defect.activity_description == epidemic_scenario.activity_description("person", "get_immune")
    assert is_executable(defects)
    assert not is_elaborate(defects)


def test_missing_activity_is_absent_only_against_a_scenario(epidemic_source, epidemic_scenario):
    start = epidemic_source.index("  activity get_immune {")
    end = epidemic_source.index("}\n  }\n", start) + len("}\n  }\n")
    source = epidemic_source[:start] + epidemic_source[end:]
    source = source.replace("schedule conditional_do person.get_immune when infected\n", "")

    defects = check_program(source, epidemic_scenario)
    assert [(d.activity_name, d.reason) for d in defects] == [("get_immune", ABSENT_REASON)]
    assert check_program(source) == []


def test_scheduled_activity_without_effect(epidemic_source):
    source = epidemic_source.replace("    pos := nearby_cell(1)\n", "    if infected {\n    }\n")
    defects = check_program(source)
    assert [(d.activity_name, d.reason) for d in defects] == [("move", NO_EFFECT_REASON)]


def test_compilation_errors_come_first_sorted_by_line(epidemic_source, epidemic_scenario):
    source = (epidemic_source
              .replace("neighbor.was_infected := true", "neighbor.was_infectd := true")
              .replace("pos := nearby_cell(1)", "pos := nearby_cell(radius)")
              .replace("      infected := false\n      immune := true\n", "      todo\n"))
    defects = check_program(source, epidemic_scenario)
    kinds = [d.kind for d in defects]
    assert kinds[:2] == [DefectKind.COMPILATION_ERROR, DefectKind.COMPILATION_ERROR]
    assert defects[0].line < defects[1].line
    assert not is_executable(defects)


def test_syntax_damage_suppresses_absence(epidemic_source, epidemic_scenario):
    source = epidemic_source.replace("activity get_immune {", "activity get_immune {{")
    defects = check_program(source, epidemic_scenario)
    assert defects
    assert all(d.reason != ABSENT_REASON for d in defects)


# Mutation harness over every bundled reference

def _undefined_name(source: str) -> str:
    return source.replace(":= ", ":= undefined_name + ", 1)


def _todo_first_activity(source: str) -> str:
    """Replace the body of the first activity that emits no event with todo"""
    lines = source.splitlines(keepends=True)
    for start, line in enumerate(lines):
        if not line.startswith("  activity "):
            continue
        depth, end = 0, start
        for end in range(start, len(lines)):
            depth += lines[end].count("{") - lines[end].count("}")
            if depth == 0:
                break
        if not any("emit " in body_line for body_line in lines[start:end]):
            return "".join(lines[:start + 1] + ["    todo\n"] + lines[end:])
    raise AssertionError("no activity without events")


def _sample_dirs(corpus_dir):
    return sorted(p for p in corpus_dir.iterdir() if p.is_dir())


@pytest.mark.parametrize("mutation", ["typo", "todo"])
def test_mutations_are_detected_on_every_reference(corpus_dir, mutation):
    from representation.documents import load_conceptual

    for sample in _sample_dirs(corpus_dir):
        reference = (sample / "reference.abm").read_text(encoding="utf-8")
        rep = load_conceptual(sample / "scenario.json")
        assert check_program(reference, rep) == [], sample.name
        if mutation == "typo":
            defects = check_program(_undefined_name(reference), rep)
            assert not is_executable(defects), sample.name
        else:
            defects = check_program(_todo_first_activity(reference), rep)
            assert is_executable(defects), sample.name
            assert [d.reason for d in defects] == [TODO_REASON], sample.name


def test_rectification_prompt_carries_program_and_defects(epidemic_source):
    source = epidemic_source.replace("pos := nearby_cell(1)", "pos := nearby_cell(radius)")
    defects = check_program(source)
    prompt = build_rectification_prompt(source, defects)
    assert prompt.kind is PromptKind.RECTIFY_DEFECTS
    assert numbered_source(source).splitlines()[0] in prompt.text
    assert defects[0].triple() in prompt.text
    assert prompt.context["source"] == source
    assert prompt.context["defects"] == defects


def test_rectification_prompt_needs_defects(epidemic_source):
    with pytest.raises(EmptyDefectList):
        build_rectification_prompt(epidemic_source, [])


def test_numbered_source_pads_line_numbers():
    text = "\n".join(f"line{i}" for i in range(1, 11))
    numbered = numbered_source(text).splitlines()
    assert numbered[0] == " 1 | line1"
    assert numbered[9] == "10 | line10"


INJECTIONS = 25


def _activity_spans(lines):
    """(object, activity, declaration index, closing-brace index) of every activity"""
    spans, owner = [], None
    for start, line in enumerate(lines):
        if line.startswith("object "):
            owner = line.split()[1]
        if not line.startswith("  activity "):
            continue
        depth, end = 0, start
        for end in range(start, len(lines)):
            depth += lines[end].count("{") - lines[end].count("}")
            if depth == 0:
                break
        spans.append((owner, line.split()[1], start, end))
    return spans


def _pick_reference(corpus_dir, rng):
    from representation.documents import load_conceptual

    sample = rng.choice(_sample_dirs(corpus_dir))
    lines = (sample / "reference.abm").read_text(encoding="utf-8").splitlines(keepends=True)
    return sample.name, lines, load_conceptual(sample / "scenario.json")


@pytest.mark.parametrize("case", range(INJECTIONS))
def test_injected_unknown_name_is_reported_on_its_line(corpus_dir, case):
    rng = random.Random(case)
    name, lines, rep = _pick_reference(corpus_dir, rng)
    index = rng.choice([i for i, line in enumerate(lines) if " := " in line])
    lines[index] = lines[index].split(" := ", 1)[0] + " := ghost_value\n"
    defects = check_program("".join(lines), rep)
    assert [(d.kind, d.line, d.excerpt) for d in defects] == [
        (DefectKind.COMPILATION_ERROR, index + 1, "ghost_value")], name


@pytest.mark.parametrize("case", range(INJECTIONS))
def test_injected_placeholder_is_reported_for_its_activity(corpus_dir, case):
    rng = random.Random(1000 + case)
    name, lines, rep = _pick_reference(corpus_dir, rng)
    # emptying an emitting activity would also orphan its event_count recorder
    spans = [s for s in _activity_spans(lines) if not any("emit " in l for l in lines[s[2]:s[3]])]
    owner, activity, start, end = rng.choice(spans)
    body, reason = rng.choice([("    todo\n", TODO_REASON), ("", EMPTY_REASON)])
    defects = check_program("".join(lines[:start + 1] + [body] + lines[end:]), rep)
    assert [(d.kind, d.object_name, d.activity_name, d.reason) for d in defects] == [
        (DefectKind.LACKING_DETAIL, owner, activity, reason)], name


def test_three_injected_defects_give_three_diagnostics(epidemic_source, epidemic_scenario):
    source = (epidemic_source
              .replace("bernoulli(infection_probability)", "bernoulli(infection_chance)")
              .replace("    pos := nearby_cell(1)\n", "    todo\n")
              .replace("    if infected and bernoulli(recovery_probability) {\n      infected := false\n"
                       "      immune := true\n    }\n", "    todo\n"))
    defects = check_program(source, epidemic_scenario)
    assert len(defects) == 3

    compilation, *lacking = defects
    assert (compilation.kind, compilation.line, compilation.excerpt) == (
        DefectKind.COMPILATION_ERROR, 22, "infection_chance")
    assert "infection_chance" in source.splitlines()[21]
    assert all(d.kind is DefectKind.LACKING_DETAIL and d.reason == TODO_REASON for d in lacking)

    program = parse_syntax(source).program
    lines = {d.activity_name: program.object(d.object_name).activity(d.activity_name).line for d in lacking}
    assert lines == {"move": 17, "get_immune": 29}
