"""
Verifier-level1: compilation errors and lacking details
File: verification/level1.py
"""

from typing import List, Optional, Set, Tuple, Union

from abm.checker import check_types
from abm.defects import Defect, lacking_detail
from abm.nodes import AbmProgram, Activity, Assign, Emit, walk_statements
from abm.parser import parse_syntax
from abm.printer import print_program
from errors import EmptyDefectList
from representation.documents import ConceptualRepresentation
from utils.logging_config import get_logger

logger = get_logger("verifier1")

TODO_REASON = "activity body is a todo placeholder"
EMPTY_REASON = "activity body is empty"
ABSENT_REASON = "activity declared in the conceptual representation is missing from the program"
NO_EFFECT_REASON = "scheduled activity has no effect (it writes no state and records no event)"


def has_effect(activity: Activity) -> bool:
    return any(isinstance(stmt, (Assign, Emit)) for _, stmt in walk_statements(activity.body))


def _lacking_reason(activity: Activity, scheduled: bool) -> Optional[str]:
    if activity.is_placeholder:
        return TODO_REASON
    if not activity.body:
        return EMPTY_REASON
    if scheduled and not has_effect(activity):
        return NO_EFFECT_REASON
    return None


def _activity_order(program: AbmProgram, rep: Optional[ConceptualRepresentation]) -> List[Tuple[str, str]]:
    """Representation declaration order first, then activities only the program has"""
    order = list(rep.declared_activities()) if rep is not None else []
    known = set(order)
    for obj in program.objects:
        for activity in obj.activities:
            pair = (obj.name, activity.name)
            if pair not in known:
                order.append(pair)
                known.add(pair)
    return order


def find_lacking_details(program: AbmProgram, rep: Optional[ConceptualRepresentation] = None,
                         damaged: Set[Tuple[str, str]] = frozenset(),
                         check_absent: bool = True) -> List[Defect]:
    scheduled = {(step.object_name, step.activity_name) for step in program.schedule}
    defects: List[Defect] = []
    for object_name, activity_name in _activity_order(program, rep):
        if (object_name, activity_name) in damaged:
            continue
        description = rep.activity_description(object_name, activity_name) if rep is not None else None
        obj = program.object(object_name)
        activity = obj.activity(activity_name) if obj is not None else None
        if activity is None:
            if check_absent:
                defects.append(lacking_detail(object_name, activity_name, ABSENT_REASON, description))
            continue
        reason = _lacking_reason(activity, (object_name, activity_name) in scheduled)
        if reason is not None:
            defects.append(lacking_detail(object_name, activity_name, reason, description))
    return defects


def check_program(program: Union[AbmProgram, str],
                  rep: Optional[ConceptualRepresentation] = None) -> List[Defect]:
    """
    All verifier-level1 defects of a program: compilation errors sorted by
    line, then lacking details in declaration order. An AbmProgram is checked
    through its canonical text, so reported lines refer to print_program output.
    """
    source = print_program(program) if isinstance(program, AbmProgram) else program
    syntax = parse_syntax(source)
    compilation = list(syntax.defects)
    if syntax.ok:
        _, compilation = check_types(syntax.program)
    # absence is only meaningful when nothing was lost to syntax recovery
    lacking = find_lacking_details(syntax.program, rep, syntax.damaged, check_absent=syntax.ok)
    defects = compilation + lacking
    logger.debug("check_program: %d compilation error(s), %d lacking detail(s)",
                 len(compilation), len(lacking))
    return defects


def is_executable(defects: List[Defect]) -> bool:
    return not any(d.is_compilation for d in defects)


def is_elaborate(defects: List[Defect]) -> bool:
    return all(d.is_compilation for d in defects)


def numbered_source(source: str) -> str:
    lines = source.splitlines()
    width = len(str(len(lines)))
    return "\n".join(f"{i:>{width}} | {line}" for i, line in enumerate(lines, start=1))


def render_compilation_errors(defects: List[Defect]) -> str:
    rendered = [d.triple() for d in defects if d.is_compilation]
    return "\n".join(rendered) if rendered else "(none)"


def render_lacking_details(defects: List[Defect]) -> str:
    rendered = []
    for d in defects:
        if d.is_compilation:
            continue
        rendered.append(f"- {d.object_name}.{d.activity_name}: {d.reason}")
        if d.activity_description:
            rendered.append(f"  description: {d.activity_description}")
    return "\n".join(rendered) if rendered else "(none)"


def build_rectification_prompt(source: str, defects: List[Defect]):
    """Assemble the RectifyDefects prompt for a program and its defects"""
    from services.generator_service import PromptKind, render_prompt

    if not defects:
        raise EmptyDefectList("a rectification prompt needs at least one defect")
    slots = {
        "program": numbered_source(source),
        "compilation_errors": render_compilation_errors(defects),
        "lacking_details": render_lacking_details(defects),
    }
    return render_prompt(PromptKind.RECTIFY_DEFECTS, slots,
                         context={"source": source, "defects": list(defects)})
