"""
Canonical printer for .abm programs
File: abm/printer.py

Output is a pure function of the tree: fixed section order, two-space
indentation, minimal parentheses. parse_program(print_program(p)) == p.
"""

from typing import List

from abm.nodes import (
    AbmProgram, Activity, Assign, BinOp, Call, CountAll, CountNeighbors, Distance, Emit,
    EventCount, ForNeighbor, If, InstanceId, Literal, Name, ObjectClass, ParamRef, StateRef,
    SumAll, Todo, UnaryOp,
)

INDENT = "  "

# binding strength; higher binds tighter
_PRECEDENCE = {
    "or": 1, "and": 2,
    "<": 4, "<=": 4, "==": 4, "!=": 4, ">=": 4, ">": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}
_NOT, _NEG, _ATOM = 3, 7, 8


def _precedence(expr) -> int:
    if isinstance(expr, BinOp):
        return _PRECEDENCE[expr.op]
    if isinstance(expr, UnaryOp):
        return _NOT if expr.op == "not" else _NEG
    return _ATOM


def format_number(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_expression(expr, minimum: int = 0) -> str:
    text = _format(expr)
    if _precedence(expr) < minimum:
        return f"({text})"
    return text


def _format(expr) -> str:
    if isinstance(expr, Literal):
        if expr.type == "str":
            return f'"{expr.value}"'
        return format_number(expr.value)
    if isinstance(expr, (Name, ParamRef)):
        return expr.name
    if isinstance(expr, StateRef):
        return expr.name if expr.owner == "self" else f"neighbor.{expr.name}"
    if isinstance(expr, InstanceId):
        return "id"
    if isinstance(expr, BinOp):
        level = _PRECEDENCE[expr.op]
        if level == 4:
            # comparisons do not chain
            left_min, right_min = 5, 5
        else:
            left_min, right_min = level, level + 1
        left = format_expression(expr.left, left_min)
        right = format_expression(expr.right, right_min)
        return f"{left} {expr.op} {right}"
    if isinstance(expr, UnaryOp):
        if expr.op == "not":
            return f"not {format_expression(expr.operand, _NOT)}"
        return f"-{format_expression(expr.operand, _NEG)}"
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(format_expression(a) for a in expr.args)})"
    if isinstance(expr, CountNeighbors):
        return f"count_neighbors({format_expression(expr.radius)}, {format_expression(expr.predicate)})"
    if isinstance(expr, CountAll):
        return f"count_all({expr.object_name}, {format_expression(expr.predicate)})"
    if isinstance(expr, SumAll):
        return f"sum_all({expr.object_name}, {format_expression(expr.value)})"
    if isinstance(expr, Distance):
        return "distance(self, neighbor)"
    if isinstance(expr, EventCount):
        return f"event_count({expr.event})"
    raise TypeError(f"cannot print expression {expr!r}")


def format_statements(body, depth: int = 0) -> List[str]:
    pad = INDENT * depth
    lines: List[str] = []
    for stmt in body:
        if isinstance(stmt, Todo):
            lines.append(f"{pad}todo")
        elif isinstance(stmt, Emit):
            lines.append(f"{pad}emit {stmt.event}")
        elif isinstance(stmt, Assign):
            lines.append(f"{pad}{_format(stmt.target)} := {format_expression(stmt.value)}")
        elif isinstance(stmt, If):
            lines.append(f"{pad}if {format_expression(stmt.condition)} {{")
            lines.extend(format_statements(stmt.then, depth + 1))
            if stmt.orelse:
                lines.append(f"{pad}}} else {{")
                lines.extend(format_statements(stmt.orelse, depth + 1))
            lines.append(f"{pad}}}")
        elif isinstance(stmt, ForNeighbor):
            lines.append(f"{pad}for neighbor within {format_expression(stmt.radius)} {{")
            lines.extend(format_statements(stmt.body, depth + 1))
            lines.append(f"{pad}}}")
        else:
            raise TypeError(f"cannot print statement {stmt!r}")
    return lines


def format_activity(activity: Activity, depth: int = 1) -> List[str]:
    pad = INDENT * depth
    lines = [f"{pad}activity {activity.name} {{"]
    lines.extend(format_statements(activity.body, depth + 1))
    lines.append(f"{pad}}}")
    return lines


def format_object(obj: ObjectClass) -> List[str]:
    lines = [f"object {obj.name} {{"]
    for decl in obj.states:
        lines.append(f"{INDENT}state {decl.name}: {decl.type} = {format_expression(decl.default)}")
    for activity in obj.activities:
        lines.extend(format_activity(activity))
    lines.append("}")
    return lines


def print_program(program: AbmProgram) -> str:
    sections: List[List[str]] = [[f"model {program.name}"]]
    if program.params:
        sections.append([f"param {p.name} = {format_number(p.value)}" for p in program.params])
    width, height = program.grid
    sections.append([f"grid {width} by {height}"])
    for obj in program.objects:
        sections.append(format_object(obj))
    if program.inits:
        sections.append([f"init {i.object_name} count {format_expression(i.count)}" for i in program.inits])
    if program.schedule:
        steps = []
        for step in program.schedule:
            line = f"schedule {step.kind.value} {step.object_name}.{step.activity_name}"
            if step.condition is not None:
                line += f" when {format_expression(step.condition)}"
            steps.append(line)
        sections.append(steps)
    if program.recorders:
        sections.append([f"record {r.metric} = {format_expression(r.expr)}" for r in program.recorders])
    return "\n\n".join("\n".join(section) for section in sections) + "\n"
