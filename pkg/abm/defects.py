"""
Defect records produced by the DSL front end and verifier-level1
File: abm/defects.py
"""

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional


class DefectKind(str, Enum):
    COMPILATION_ERROR = "CompilationError"
    LACKING_DETAIL = "LackingDetail"


@dataclass(frozen=True)
class Defect:
    """A compilation error (line, excerpt) or a lacking detail (object, activity)."""

    kind: DefectKind
    reason: str
    line: Optional[int] = None
    excerpt: Optional[str] = None
    object_name: Optional[str] = None
    activity_name: Optional[str] = None
    activity_description: Optional[str] = None

    def __post_init__(self):
        if not self.reason:
            raise ValueError("defect reason must not be empty")
        if self.kind is DefectKind.COMPILATION_ERROR:
            if self.line is None or self.line < 1:
                raise ValueError("compilation errors need a 1-based line")
        elif not (self.object_name and self.activity_name):
            raise ValueError("lacking details name an object/activity pair")

    @property
    def is_compilation(self) -> bool:
        return self.kind is DefectKind.COMPILATION_ERROR

    def triple(self) -> str:
        """[error_line, error_code, error_reasons] rendering used in prompts"""
        return json.dumps([self.line, self.excerpt or "", self.reason], ensure_ascii=False)

    def to_dict(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"kind": self.kind.value}
        if self.is_compilation:
            record["line"] = self.line
            record["excerpt"] = self.excerpt or ""
        else:
            record["object"] = self.object_name
            record["activity"] = self.activity_name
        record["reason"] = self.reason
        if self.activity_description is not None:
            record["description"] = self.activity_description
        return record


def compilation_error(line: int, excerpt: str, reason: str) -> Defect:
    return Defect(DefectKind.COMPILATION_ERROR, reason, line=max(line, 1), excerpt=excerpt)


def lacking_detail(object_name: str, activity_name: str, reason: str,
                   description: Optional[str] = None) -> Defect:
    return Defect(DefectKind.LACKING_DETAIL, reason, object_name=object_name,
                  activity_name=activity_name, activity_description=description)
