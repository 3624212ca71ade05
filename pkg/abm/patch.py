"""
Structured modification directives and their application to programs
File: abm/patch.py

A Solution carries a list of directives (the Modify contract). apply_patch
edits the tree and returns printed source; the caller re-verifies it, so a
patch may leave compilation errors behind for the repair loop to fix.
patch_program returns the checked program and refuses one that does not compile.
"""

from dataclasses import replace
from typing import Any, Iterable, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from abm.lexer import is_identifier
from abm.nodes import AbmProgram, Activity, Param, ScheduleKind, ScheduleStep, StateDecl, STATE_TYPES
from abm.parser import parse_expression, parse_program, parse_statements
from abm.printer import print_program
from errors import PatchError

DirectiveOp = Literal[
    "add_state", "remove_state", "add_activity", "replace_activity", "remove_activity",
    "add_schedule", "remove_schedule", "set_parameter",
]

# op -> fields that must be present
REQUIRED_FIELDS = {
    "add_state": ("object", "name", "type", "default"),
    "remove_state": ("object", "name"),
    "add_activity": ("object", "name", "body"),
    "replace_activity": ("object", "name", "body"),
    "remove_activity": ("object", "name"),
    "add_schedule": ("kind", "object", "activity"),
    "remove_schedule": ("object", "activity"),
    "set_parameter": ("name", "value"),
}


class Directive(BaseModel):
    """One structural edit; which fields apply depends on `op`"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    op: DirectiveOp
    object: Optional[str] = None
    name: Optional[str] = None
    type: Optional[str] = None
    default: Optional[str] = None
    body: Optional[str] = None
    kind: Optional[str] = None
    activity: Optional[str] = None
    condition: Optional[str] = None
    index: Optional[int] = None
    value: Optional[Union[int, float]] = None

    @field_validator("object", "name", "activity")
    @classmethod
    def _check_identifier(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and not is_identifier(v):
            raise ValueError(f"'{v}' is not a valid identifier")
        return v

    @field_validator("type")
    @classmethod
    def _check_type(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and v not in STATE_TYPES:
            raise ValueError(f"state type must be one of {', '.join(STATE_TYPES)}")
        return v

    @field_validator("kind", mode="before")
    @classmethod
    def _normalize_kind(cls, v: Any) -> Any:
        if v is None:
            return v
        kind = str(v).strip().lower()
        if kind not in {k.value for k in ScheduleKind}:
            raise ValueError(f"unknown schedule kind '{v}'")
        return kind

    @model_validator(mode="after")
    def _check_required(self) -> "Directive":
        missing = [f for f in REQUIRED_FIELDS[self.op] if getattr(self, f) is None]
        if missing:
            raise ValueError(f"{self.op} needs {', '.join(missing)}")
        return self

    @property
    def is_structural(self) -> bool:
        """Adds or removes a state or an activity"""
        return self.op in ("add_state", "remove_state", "add_activity", "remove_activity")

    def describe(self) -> str:
        if self.op == "set_parameter":
            return f"set_parameter {self.name} = {self.value}"
        if self.op in ("add_schedule", "remove_schedule"):
            return f"{self.op} {self.object}.{self.activity}"
        return f"{self.op} {self.object}.{self.name}"


def _parse_body(directive: Directive) -> tuple:
    body, defects = parse_statements(directive.body)
    if defects:
        first = defects[0]
        raise PatchError(f"{directive.describe()}: body does not parse: {first.reason} "
                         f"(line {first.line} of body)")
    return body


def _parse_expr(directive: Directive, text: str, what: str):
    expr, defects = parse_expression(text)
    if defects or expr is None:
        reason = defects[0].reason if defects else "empty expression"
        raise PatchError(f"{directive.describe()}: {what} does not parse: {reason}")
    return expr


class _Patcher:
    def __init__(self, program: AbmProgram):
        # edited nodes are unresolved until the result is re-checked
        self.program = replace(program, resolved=False)

    def object(self, directive: Directive):
        obj = self.program.object(directive.object)
        if obj is None:
            raise PatchError(f"{directive.describe()}: unknown object {directive.object}")
        return obj

    def put_object(self, new_obj):
        objects = tuple(new_obj if o.name == new_obj.name else o for o in self.program.objects)
        self.program = replace(self.program, objects=objects)

    def apply(self, directive: Directive):
        getattr(self, directive.op)(directive)

    def add_state(self, d: Directive):
        obj = self.object(d)
        if obj.state(d.name) is not None:
            raise PatchError(f"{d.describe()}: state already exists")
        decl = StateDecl(d.name, d.type, _parse_expr(d, d.default, "default"))
        self.put_object(replace(obj, states=obj.states + (decl,)))

    def remove_state(self, d: Directive):
        obj = self.object(d)
        if obj.state(d.name) is None:
            raise PatchError(f"{d.describe()}: no such state")
        self.put_object(replace(obj, states=tuple(s for s in obj.states if s.name != d.name)))

    def add_activity(self, d: Directive):
        obj = self.object(d)
        if obj.activity(d.name) is not None:
            raise PatchError(f"{d.describe()}: activity already exists")
        activity = Activity(d.name, _parse_body(d))
        self.put_object(replace(obj, activities=obj.activities + (activity,)))

    def replace_activity(self, d: Directive):
        obj = self.object(d)
        if obj.activity(d.name) is None:
            raise PatchError(f"{d.describe()}: no such activity")
        body = _parse_body(d)
        activities = tuple(replace(a, body=body) if a.name == d.name else a for a in obj.activities)
        self.put_object(replace(obj, activities=activities))

    def remove_activity(self, d: Directive):
        obj = self.object(d)
        if obj.activity(d.name) is None:
            raise PatchError(f"{d.describe()}: no such activity")
        self.put_object(replace(obj, activities=tuple(a for a in obj.activities if a.name != d.name)))
        # the activity's schedule steps go with it
        schedule = tuple(s for s in self.program.schedule
                         if not (s.object_name == d.object and s.activity_name == d.name))
        self.program = replace(self.program, schedule=schedule)

    def add_schedule(self, d: Directive):
        self.object(d)
        condition = _parse_expr(d, d.condition, "condition") if d.condition else None
        step = ScheduleStep(ScheduleKind(d.kind), d.object, d.activity, condition)
        schedule = list(self.program.schedule)
        index = len(schedule) if d.index is None else d.index
        if not 0 <= index <= len(schedule):
            raise PatchError(f"{d.describe()}: schedule index {index} out of range 0..{len(schedule)}")
        schedule.insert(index, step)
        self.program = replace(self.program, schedule=tuple(schedule))

    def remove_schedule(self, d: Directive):
        kept = tuple(s for s in self.program.schedule
                     if not (s.object_name == d.object and s.activity_name == d.activity))
        if len(kept) == len(self.program.schedule):
            raise PatchError(f"{d.describe()}: no such schedule step")
        self.program = replace(self.program, schedule=kept)

    def set_parameter(self, d: Directive):
        params = [p for p in self.program.params if p.name != d.name]
        params.append(Param(d.name, d.value))
        self.program = replace(self.program, params=tuple(params))


def _edit(program: AbmProgram, directives: Iterable[Directive]) -> AbmProgram:
    patcher = _Patcher(program)
    for directive in directives:
        patcher.apply(directive)
    return patcher.program


def patch_program(program: AbmProgram, directives: Iterable[Directive]) -> AbmProgram:
    """Apply directives in order; the result is type-checked and ready to simulate"""
    result = parse_program(print_program(_edit(program, directives)))
    if isinstance(result, list):
        first = result[0]
        raise PatchError(f"patched program does not compile: {first.reason} (line {first.line})")
    return result


def apply_patch(program: AbmProgram, directives: List[Directive]) -> str:
    """Apply directives in order and return the canonical source of the result"""
    return print_program(_edit(program, directives))
