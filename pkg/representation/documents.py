"""
Conceptual and objective representation documents
File: representation/documents.py

Both documents are JSON. Shape is validated with pydantic; cross references
(duplicate names, dangling schedule entries) are checked afterwards so every
SchemaError can name the exact offending path and its line in the source text.
"""

import json
import re
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, StrictFloat, StrictInt, ValidationError, model_validator

from abm.lexer import is_identifier
from abm.nodes import ScheduleKind
from errors import DocumentSyntaxError, SchemaError

SCHEDULE_KINDS = {
    "Do": ScheduleKind.DO,
    "Random_Do": ScheduleKind.RANDOM_DO,
    "Conditional_Do": ScheduleKind.CONDITIONAL_DO,
    "Random_Conditional_Do": ScheduleKind.RANDOM_CONDITIONAL_DO,
}


def _identifier(v: str) -> str:
    if not is_identifier(v):
        raise ValueError(f"'{v}' is not a legal identifier")
    return v


def _non_empty(v: str) -> str:
    if not v.strip():
        raise ValueError("must not be empty")
    return v


Identifier = Annotated[str, AfterValidator(_identifier)]
Text = Annotated[str, AfterValidator(_non_empty)]


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, strict=True)


class StateSpec(_Document):
    name: Identifier
    description: Text
    type: Literal["bool", "int", "real", "position"]


class ActivitySpec(_Document):
    name: Identifier
    description: Text


class ObjectSpec(_Document):
    name: Identifier
    states: List[StateSpec] = Field(min_length=1)
    activities: List[ActivitySpec] = Field(default_factory=list)

    def activity(self, name: str) -> Optional[ActivitySpec]:
        return next((a for a in self.activities if a.name == name), None)


class ScheduleDirective(_Document):
    kind: Literal["Do", "Random_Do", "Conditional_Do", "Random_Conditional_Do"]
    object: Identifier
    activity: Identifier
    condition: Optional[str] = None

    @model_validator(mode="after")
    def _condition_matches_kind(self) -> "ScheduleDirective":
        conditional = self.schedule_kind.is_conditional
        has_condition = bool(self.condition and self.condition.strip())
        if conditional and not has_condition:
            raise ValueError(f"{self.kind} needs a non-empty condition")
        if not conditional and self.condition is not None:
            raise ValueError(f"{self.kind} takes no condition")
        return self

    @property
    def schedule_kind(self) -> ScheduleKind:
        return SCHEDULE_KINDS[self.kind]


class ConceptualRepresentation(_Document):
    """Objects, scheduling and global parameters of one scenario"""

    objects: List[ObjectSpec] = Field(min_length=1)
    scheduling: List[ScheduleDirective] = Field(default_factory=list)
    parameters: Dict[Identifier, Union[StrictInt, StrictFloat]] = Field(default_factory=dict)

    def object(self, name: str) -> Optional[ObjectSpec]:
        return next((o for o in self.objects if o.name == name), None)

    def activity_description(self, object_name: str, activity_name: str) -> Optional[str]:
        obj = self.object(object_name)
        activity = obj.activity(activity_name) if obj else None
        return activity.description if activity else None

    def declared_activities(self) -> List[Tuple[str, str]]:
        """(object, activity) pairs in declaration order"""
        return [(o.name, a.name) for o in self.objects for a in o.activities]


class Criterion(_Document):
    variable_name: Identifier
    variable_example: Any = None
    requirement: Text


class ObjectiveRepresentation(_Document):
    problem: Text
    criteria: List[Criterion] = Field(min_length=1)


# Locating JSON paths in the source text

_WHITESPACE = re.compile(r"[ \t\n\r]*")


def _value_offsets(text: str) -> Dict[Tuple, int]:
    """Map every JSON path (tuple of keys/indices) to the offset where its value starts"""
    decoder = json.JSONDecoder()
    offsets: Dict[Tuple, int] = {}

    def skip(pos: int) -> int:
        return _WHITESPACE.match(text, pos).end()

    def value(pos: int, path: Tuple) -> int:
        pos = skip(pos)
        offsets[path] = pos
        if text[pos] == "{":
            pos = skip(pos + 1)
            if text[pos] == "}":
                return pos + 1
            while True:
                key, pos = decoder.raw_decode(text, skip(pos))
                pos = skip(pos) + 1  # ':'
                pos = skip(value(pos, path + (key,)))
                if text[pos] == ",":
                    pos += 1
                    continue
                return pos + 1
        if text[pos] == "[":
            pos = skip(pos + 1)
            if text[pos] == "]":
                return pos + 1
            index = 0
            while True:
                pos = skip(value(pos, path + (index,)))
                index += 1
                if text[pos] == ",":
                    pos += 1
                    continue
                return pos + 1
        _, end = decoder.raw_decode(text, pos)
        return end

    value(0, ())
    return offsets


def format_path(path: Tuple) -> str:
    rendered = "$"
    for part in path:
        rendered += f"[{part}]" if isinstance(part, int) else f".{part}"
    return rendered


def _locate(text: str, path: Tuple) -> Tuple[Tuple, int]:
    """Longest prefix of path present in the document, and its 1-based line"""
    offsets = _value_offsets(text)
    for end in range(len(path), -1, -1):
        if path[:end] in offsets:
            return path[:end], text.count("\n", 0, offsets[path[:end]]) + 1
    return (), 1


def _load_json(document: Union[str, bytes]) -> Tuple[str, Any]:
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            line = document[:exc.start].count(b"\n") + 1
            raise DocumentSyntaxError(f"not UTF-8 text: {exc.reason} at byte {exc.start}",
                                      path="$", line=line) from exc
    text = document
    try:
        return text, json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(exc.msg, path="$", line=exc.lineno) from exc


def _validate(model, text: str, data: Any):
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        message = first["msg"].removeprefix("Value error, ")
        raise _schema_error(text, tuple(first["loc"]), message) from exc


def _schema_error(text: str, path: Tuple, message: str) -> SchemaError:
    path, line = _locate(text, path)
    return SchemaError(message, path=format_path(path), line=line)


def _check_conceptual_references(text: str, rep: ConceptualRepresentation):
    object_names: Dict[str, int] = {}
    for i, obj in enumerate(rep.objects):
        if obj.name in object_names:
            raise _schema_error(text, ("objects", i, "name"), f"duplicate object {obj.name}")
        object_names[obj.name] = i
        for field, items in (("states", obj.states), ("activities", obj.activities)):
            seen = set()
            for j, item in enumerate(items):
                if item.name in seen:
                    raise _schema_error(text, ("objects", i, field, j, "name"),
                                        f"duplicate {field[:-1] if field == 'states' else 'activity'} "
                                        f"{obj.name}.{item.name}")
                seen.add(item.name)
        positions = [j for j, s in enumerate(obj.states) if s.type == "position"]
        if len(positions) > 1:
            raise _schema_error(text, ("objects", i, "states", positions[1], "type"),
                                f"object {obj.name} declares more than one position state")
    for k, entry in enumerate(rep.scheduling):
        obj = rep.object(entry.object)
        if obj is None:
            raise _schema_error(text, ("scheduling", k, "object"),
                                f"scheduling references undeclared object {entry.object}")
        if obj.activity(entry.activity) is None:
            raise _schema_error(text, ("scheduling", k, "activity"),
                                f"scheduling references undeclared activity {entry.object}.{entry.activity}")


def parse_conceptual(document: Union[str, bytes]) -> ConceptualRepresentation:
    text, data = _load_json(document)
    rep = _validate(ConceptualRepresentation, text, data)
    _check_conceptual_references(text, rep)
    return rep


def parse_objective(document: Union[str, bytes]) -> ObjectiveRepresentation:
    text, data = _load_json(document)
    return _validate(ObjectiveRepresentation, text, data)


def render_conceptual(rep: ConceptualRepresentation) -> str:
    """Canonical JSON text; declaration order preserved, unicode kept verbatim"""
    data = rep.model_dump(mode="json", exclude_none=True)
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def render_objective(objective: ObjectiveRepresentation) -> str:
    return json.dumps(objective.model_dump(mode="json"), indent=2, ensure_ascii=False) + "\n"


def load_conceptual(path: Union[str, Path]) -> ConceptualRepresentation:
    return parse_conceptual(Path(path).read_bytes())


def load_objective(path: Union[str, Path]) -> ObjectiveRepresentation:
    return parse_objective(Path(path).read_bytes())
