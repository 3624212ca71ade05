"""
Name resolution and type checking for parsed .abm programs
File: abm/checker.py
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Set, Tuple

from abm.defects import Defect, compilation_error
from abm.nodes import (
    AbmProgram, Activity, Assign, BinOp, Call, CountAll, CountNeighbors, Distance, Emit,
    EventCount, ForNeighbor, If, InitSpec, InstanceId, Literal, Name, ObjectClass, ParamRef,
    Recorder, ScheduleStep, StateDecl, StateRef, SumAll, Todo, UnaryOp, walk_statements,
)
from abm.printer import format_expression

NUMERIC = ("int", "real")
ERROR = "error"  # already reported; suppresses cascades

RANDOM_CALLS = ("bernoulli", "uniform", "randint", "random_cell", "nearby_cell")


@dataclass(frozen=True)
class Scope:
    """What an expression may see where it occurs"""

    where: str  # state, activity, condition, init, recorder
    object_name: Optional[str] = None
    visible_states: Optional[Tuple[str, ...]] = None  # None means all states of object_name
    neighbor_class: Optional[str] = None


def _numeric(*types: str) -> bool:
    return all(t in NUMERIC for t in types)


def _assignable(target: str, value: str) -> bool:
    return target == value or (target == "real" and value == "int")


class TypeChecker:
    def __init__(self, program: AbmProgram):
        self.program = program
        self.defects: List[Defect] = []
        self.params = program.parameters
        self.classes: Dict[str, ObjectClass] = {}
        self.emitted: Set[str] = {
            stmt.event
            for obj in program.objects
            for activity in obj.activities
            for _, stmt in walk_statements(activity.body)
            if isinstance(stmt, Emit)
        }

    def report(self, node, excerpt: str, reason: str):
        self.defects.append(compilation_error(node.line or 1, excerpt, reason))

    def mismatch(self, node, reason: str):
        self.report(node, format_expression(node), f"type mismatch: {reason}")

    # Declarations

    def check(self) -> AbmProgram:
        program = self.program
        seen_params: Set[str] = set()
        for param in sorted(program.params, key=lambda p: p.line):
            if param.name in seen_params:
                self.report(param, param.name, f"duplicate parameter {param.name}")
            seen_params.add(param.name)

        for obj in program.objects:
            if obj.name in self.classes:
                self.report(obj, obj.name, f"duplicate object {obj.name}")
                continue
            self.classes[obj.name] = obj

        objects = tuple(self.check_object(obj) for obj in program.objects)
        inits = tuple(self.check_init(spec) for spec in self._unique_inits())
        schedule = tuple(self.check_schedule(step) for step in program.schedule)
        recorders = tuple(self.check_recorder(rec) for rec in self._unique_recorders())
        return replace(program, objects=objects, inits=inits, schedule=schedule, recorders=recorders)

    def _unique_inits(self) -> List[InitSpec]:
        seen: Set[str] = set()
        unique = []
        for spec in sorted(self.program.inits, key=lambda i: i.line):
            if spec.object_name in seen:
                self.report(spec, spec.object_name, f"duplicate init for object {spec.object_name}")
                continue
            seen.add(spec.object_name)
            unique.append(spec)
        return unique

    def _unique_recorders(self) -> List[Recorder]:
        seen: Set[str] = set()
        unique = []
        for rec in self.program.recorders:
            if rec.metric in seen:
                self.report(rec, rec.metric, f"duplicate recorder {rec.metric}")
                continue
            seen.add(rec.metric)
            unique.append(rec)
        return unique

    def check_object(self, obj: ObjectClass) -> ObjectClass:
        states: List[StateDecl] = []
        names: List[str] = []
        positions = 0
        for decl in obj.states:
            if decl.name in names:
                self.report(decl, decl.name, f"duplicate state {decl.name} in object {obj.name}")
            if decl.type == "position":
                positions += 1
                if positions == 2:
                    self.report(decl, decl.name, f"object {obj.name} declares more than one position state")
            scope = Scope("state", obj.name, visible_states=tuple(names))
            default, value_type = self.expr(decl.default, scope)
            if value_type != ERROR and not _assignable(decl.type, value_type):
                self.mismatch(decl.default, f"state {decl.name} is {decl.type}, initial value is {value_type}")
            states.append(replace(decl, default=default))
            names.append(decl.name)

        activities: List[Activity] = []
        seen: Set[str] = set()
        for activity in obj.activities:
            if activity.name in seen:
                self.report(activity, activity.name, f"duplicate activity {activity.name} in object {obj.name}")
            seen.add(activity.name)
            activities.append(self.check_activity(obj, activity))
        return replace(obj, states=tuple(states), activities=tuple(activities))

    def check_activity(self, obj: ObjectClass, activity: Activity) -> Activity:
        if activity.is_placeholder and len(activity.body) > 1:
            todo = next(s for s in activity.body if isinstance(s, Todo))
            self.report(todo, "todo", "todo must be the only statement of an activity")
        scope = Scope("activity", obj.name)
        body = tuple(self.statement(stmt, scope, top=True) for stmt in activity.body)
        return replace(activity, body=body)

    def check_init(self, spec: InitSpec) -> InitSpec:
        if spec.object_name not in self.classes:
            self.report(spec, spec.object_name, f"unknown object {spec.object_name}")
        count, count_type = self.expr(spec.count, Scope("init"))
        if count_type not in ("int", ERROR):
            self.mismatch(spec.count, f"instance count must be int, got {count_type}")
        return replace(spec, count=count)

    def check_schedule(self, step: ScheduleStep) -> ScheduleStep:
        obj = self.classes.get(step.object_name)
        if obj is None:
            self.report(step, step.object_name, f"unknown object {step.object_name}")
        elif obj.activity(step.activity_name) is None:
            self.report(step, f"{step.object_name}.{step.activity_name}",
                        f"unknown activity {step.activity_name} of object {step.object_name}")
        if step.kind.is_conditional and step.condition is None:
            self.report(step, step.kind.value, f"{step.kind.value} needs a 'when' condition")
        if not step.kind.is_conditional and step.condition is not None:
            self.report(step, step.kind.value, f"{step.kind.value} takes no condition")
        if step.condition is None or obj is None:
            return step
        condition, cond_type = self.expr(step.condition, Scope("condition", obj.name))
        if cond_type not in ("bool", ERROR):
            self.mismatch(step.condition, f"schedule condition must be bool, got {cond_type}")
        return replace(step, condition=condition)

    def check_recorder(self, rec: Recorder) -> Recorder:
        value, value_type = self.expr(rec.expr, Scope("recorder"))
        if value_type not in ("int", "real", "bool", ERROR):
            self.mismatch(rec.expr, f"metric {rec.metric} must be numeric, got {value_type}")
        return replace(rec, expr=value)

    # Statements

    def statement(self, stmt, scope: Scope, top: bool = False):
        if isinstance(stmt, Todo):
            if not top:
                self.report(stmt, "todo", "todo is only allowed as a whole activity body")
            return stmt
        if isinstance(stmt, Emit):
            return stmt
        if isinstance(stmt, Assign):
            return self.assign(stmt, scope)
        if isinstance(stmt, If):
            condition, cond_type = self.expr(stmt.condition, scope)
            if cond_type not in ("bool", ERROR):
                self.mismatch(stmt.condition, f"condition must be bool, got {cond_type}")
            then = tuple(self.statement(s, scope) for s in stmt.then)
            orelse = tuple(self.statement(s, scope) for s in stmt.orelse)
            return replace(stmt, condition=condition, then=then, orelse=orelse)
        if isinstance(stmt, ForNeighbor):
            obj = self.classes[scope.object_name]
            if obj.position_state is None:
                self.report(stmt, "for neighbor", f"object {obj.name} has no position state")
            radius, radius_type = self.expr(stmt.radius, scope)
            if radius_type not in ("int", "real", ERROR):
                self.mismatch(stmt.radius, f"neighbor radius must be a number, got {radius_type}")
            inner = replace(scope, neighbor_class=obj.name)
            body = tuple(self.statement(s, inner) for s in stmt.body)
            return replace(stmt, radius=radius, body=body)
        raise TypeError(f"not a statement: {stmt!r}")

    def assign(self, stmt: Assign, scope: Scope) -> Assign:
        target = stmt.target
        if isinstance(target, Name):
            owner_class = self.classes[scope.object_name]
            decl = owner_class.state(target.name)
            resolved = StateRef(target.name, "self", line=target.line)
        else:
            if scope.neighbor_class is None:
                self.report(target, f"neighbor.{target.name}", "'neighbor' used outside a neighbor scope")
                decl, owner_class = None, None
            else:
                owner_class = self.classes[scope.neighbor_class]
                decl = owner_class.state(target.name)
            resolved = target
        value, value_type = self.expr(stmt.value, scope)
        if owner_class is not None and decl is None:
            self.report(target, target.name, f"unknown state of object {owner_class.name}")
        elif decl is not None and value_type != ERROR and not _assignable(decl.type, value_type):
            self.mismatch(stmt.value, f"cannot assign {value_type} to {decl.type} state {decl.name}")
        return replace(stmt, target=resolved, value=value)

    # Expressions

    def expr(self, node, scope: Scope):
        """Return (resolved expression, type)"""
        if isinstance(node, Literal):
            return node, node.type
        if isinstance(node, Name):
            return self.name(node, scope)
        if isinstance(node, StateRef):
            if node.owner == "self":
                return self.own_ref(node, scope)
            return self.neighbor_ref(node, scope)
        if isinstance(node, ParamRef):
            if node.name not in self.params:
                self.report(node, node.name, f"unknown parameter {node.name}")
                return node, ERROR
            return node, "int" if isinstance(self.params[node.name], int) else "real"
        if isinstance(node, InstanceId):
            if scope.object_name is None:
                self.report(node, "id", "'id' is only valid inside an object")
                return node, ERROR
            return node, "int"
        if isinstance(node, BinOp):
            return self.binop(node, scope)
        if isinstance(node, UnaryOp):
            operand, operand_type = self.expr(node.operand, scope)
            node = replace(node, operand=operand)
            if operand_type == ERROR:
                return node, ERROR
            if node.op == "not":
                if operand_type != "bool":
                    self.mismatch(node, f"'not' needs bool, got {operand_type}")
                    return node, ERROR
                return node, "bool"
            if not _numeric(operand_type):
                self.mismatch(node, f"'-' needs a number, got {operand_type}")
                return node, ERROR
            return node, operand_type
        if isinstance(node, Call):
            return self.call(node, scope)
        if isinstance(node, CountNeighbors):
            return self.count_neighbors(node, scope)
        if isinstance(node, (CountAll, SumAll)):
            return self.aggregate(node, scope)
        if isinstance(node, Distance):
            if scope.neighbor_class is None or scope.object_name is None:
                self.report(node, "distance(self, neighbor)", "distance needs both self and a neighbor in scope")
                return node, ERROR
            for name in (scope.object_name, scope.neighbor_class):
                if self.classes[name].position_state is None:
                    self.report(node, "distance(self, neighbor)", f"object {name} has no position state")
                    return node, ERROR
            return node, "int"
        if isinstance(node, EventCount):
            if scope.where != "recorder":
                self.report(node, f"event_count({node.event})", "event_count is only valid in recorders")
                return node, ERROR
            if node.event not in self.emitted:
                self.report(node, node.event, f"event {node.event} is never emitted")
                return node, ERROR
            return node, "int"
        raise TypeError(f"not an expression: {node!r}")

    def name(self, node: Name, scope: Scope):
        if scope.object_name is not None:
            obj = self.classes[scope.object_name]
            decl = obj.state(node.name)
            visible = scope.visible_states is None or node.name in scope.visible_states
            if decl is not None and visible:
                return StateRef(node.name, "self", line=node.line), decl.type
            if decl is not None and node.name not in self.params:
                self.report(node, node.name, f"state {node.name} is used before it is initialised")
                return node, ERROR
        if node.name in self.params:
            param_type = "int" if isinstance(self.params[node.name], int) else "real"
            return ParamRef(node.name, line=node.line), param_type
        if scope.object_name is not None:
            self.report(node, node.name, f"unknown state of object {scope.object_name}")
        else:
            self.report(node, node.name, f"unknown parameter {node.name}")
        return node, ERROR

    def own_ref(self, node: StateRef, scope: Scope):
        decl = self.classes[scope.object_name].state(node.name) if scope.object_name else None
        if decl is None:
            self.report(node, node.name, f"unknown state of object {scope.object_name}")
            return node, ERROR
        return node, decl.type

    def neighbor_ref(self, node: StateRef, scope: Scope):
        if scope.neighbor_class is None:
            self.report(node, f"neighbor.{node.name}", "'neighbor' used outside a neighbor scope")
            return node, ERROR
        decl = self.classes[scope.neighbor_class].state(node.name)
        if decl is None:
            self.report(node, node.name, f"unknown state of object {scope.neighbor_class}")
            return node, ERROR
        return node, decl.type

    def binop(self, node: BinOp, scope: Scope):
        left, left_type = self.expr(node.left, scope)
        right, right_type = self.expr(node.right, scope)
        node = replace(node, left=left, right=right)
        if ERROR in (left_type, right_type):
            return node, ERROR
        op = node.op
        if op in ("and", "or"):
            if left_type == right_type == "bool":
                return node, "bool"
            self.mismatch(node, f"'{op}' needs bool operands, got {left_type} and {right_type}")
            return node, ERROR
        if op in ("==", "!="):
            if (left_type == right_type and left_type != "str") or _numeric(left_type, right_type):
                return node, "bool"
            self.mismatch(node, f"cannot compare {left_type} with {right_type}")
            return node, ERROR
        if not _numeric(left_type, right_type):
            self.mismatch(node, f"operator '{op}' needs numbers, got {left_type} and {right_type}")
            return node, ERROR
        if op in ("<", "<=", ">", ">="):
            return node, "bool"
        if op == "/" or "real" in (left_type, right_type):
            return node, "real"
        return node, "int"

    def call(self, node: Call, scope: Scope):
        if node.func in RANDOM_CALLS and scope.where in ("init", "recorder"):
            self.report(node, node.func, f"{node.func} draws randomness and is not allowed here")
            return node, ERROR
        resolved = [self.expr(arg, scope) for arg in node.args]
        node = replace(node, args=tuple(arg for arg, _ in resolved))
        types = [t for _, t in resolved]
        if ERROR in types:
            return node, ERROR
        func = node.func
        if func == "bernoulli":
            if not _numeric(*types):
                self.mismatch(node, f"bernoulli expects a real probability, got {types[0]}")
                return node, ERROR
            return node, "bool"
        if func == "uniform":
            if not _numeric(*types):
                self.mismatch(node, f"uniform expects numbers, got {' and '.join(types)}")
                return node, ERROR
            return node, "real"
        if func in ("randint", "cell"):
            if any(t != "int" for t in types):
                self.mismatch(node, f"{func} expects int arguments, got {' and '.join(types)}")
                return node, ERROR
            return node, "int" if func == "randint" else "position"
        if func == "random_cell":
            return node, "position"
        if func == "nearby_cell":
            if scope.object_name is None or self.classes[scope.object_name].position_state is None:
                self.report(node, func, "nearby_cell needs an object with a position state")
                return node, ERROR
            if types[0] != "int":
                self.mismatch(node, f"nearby_cell expects an int radius, got {types[0]}")
                return node, ERROR
            return node, "position"
        raise TypeError(f"unknown builtin {func}")

    def count_neighbors(self, node: CountNeighbors, scope: Scope):
        if scope.object_name is None:
            self.report(node, "count_neighbors", "count_neighbors is only valid inside an object")
            return node, ERROR
        obj = self.classes[scope.object_name]
        radius, radius_type = self.expr(node.radius, scope)
        predicate, pred_type = self.expr(node.predicate, replace(scope, neighbor_class=obj.name))
        node = replace(node, radius=radius, predicate=predicate)
        if obj.position_state is None:
            self.report(node, "count_neighbors", f"object {obj.name} has no position state")
            return node, ERROR
        if ERROR in (radius_type, pred_type):
            return node, ERROR
        if not _numeric(radius_type):
            self.mismatch(node.radius, f"neighbor radius must be a number, got {radius_type}")
            return node, ERROR
        if pred_type != "bool":
            self.mismatch(node.predicate, f"count_neighbors predicate must be bool, got {pred_type}")
            return node, ERROR
        return node, "int"

    def aggregate(self, node, scope: Scope):
        func = "count_all" if isinstance(node, CountAll) else "sum_all"
        if node.object_name not in self.classes:
            self.report(node, node.object_name, f"unknown object {node.object_name}")
            return node, ERROR
        inner_scope = replace(scope, neighbor_class=node.object_name)
        inner = node.predicate if isinstance(node, CountAll) else node.value
        resolved, inner_type = self.expr(inner, inner_scope)
        if isinstance(node, CountAll):
            node = replace(node, predicate=resolved)
        else:
            node = replace(node, value=resolved)
        if inner_type == ERROR:
            return node, ERROR
        if isinstance(node, CountAll):
            if inner_type != "bool":
                self.mismatch(node, f"count_all predicate must be bool, got {inner_type}")
                return node, ERROR
            return node, "int"
        if inner_type not in ("int", "real", "bool"):
            self.mismatch(node, f"{func} needs a numeric value, got {inner_type}")
            return node, ERROR
        return node, "real" if inner_type == "real" else "int"


def check_types(program: AbmProgram) -> Tuple[AbmProgram, List[Defect]]:
    """Resolve names and type-check; defects come back sorted by line"""
    checker = TypeChecker(program)
    resolved = checker.check()
    defects = sorted(checker.defects, key=lambda d: d.line)
    if not defects:
        resolved = replace(resolved, resolved=True)
    return resolved, defects


def expression_type(program: AbmProgram, expr, object_name: Optional[str] = None) -> str:
    """Type of an already-resolved expression, or 'error'"""
    checker = TypeChecker(program)
    checker.classes = {obj.name: obj for obj in program.objects}
    where = "activity" if object_name else "recorder"
    _, result = checker.expr(expr, Scope(where, object_name))
    return result
