"""
Backward slicing of recorded metrics
File: verification/slicing.py

Flow-insensitive over steps: any statement that writes a state in the frontier
joins the slice together with everything it reads, including enclosing guards
and the conditions of the schedule steps that run its activity.

Every random draw and every shuffled schedule step shares one stream, so a
metric that depends on any draw depends on all of them: once the frontier
reads the stream, every statement that draws joins the slice, together with
whatever decides how many draws are made.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from abm.checker import RANDOM_CALLS
from abm.nodes import (
    AbmProgram, Assign, Call, CountAll, CountNeighbors, Distance, Emit, EventCount, ForNeighbor,
    If, ParamRef, ScheduleKind, StateRef, SumAll, child_expressions,
)
from abm.parser import resolve_program
from errors import PreconditionError, UnknownMetric

StatementKey = Tuple[str, str, Tuple]  # (object, activity, statement path)
StateKey = Tuple[str, str]

SHUFFLED = (ScheduleKind.RANDOM_DO, ScheduleKind.RANDOM_CONDITIONAL_DO)


@dataclass
class _Reads:
    states: Set[StateKey] = field(default_factory=set)
    params: Set[str] = field(default_factory=set)
    events: Set[str] = field(default_factory=set)
    random: bool = False  # reads the shared random stream

    def update(self, other: "_Reads"):
        self.states |= other.states
        self.params |= other.params
        self.events |= other.events
        self.random = self.random or other.random


@dataclass(frozen=True)
class SliceResult:
    metric: str
    statements: FrozenSet[StatementKey] = frozenset()
    states: FrozenSet[StateKey] = frozenset()
    parameters: FrozenSet[str] = frozenset()
    events: FrozenSet[str] = frozenset()
    random: bool = False

    @property
    def activities(self) -> FrozenSet[Tuple[str, str]]:
        return frozenset((obj, act) for obj, act, _ in self.statements)

    def to_dict(self) -> Dict:
        return {
            "metric": self.metric,
            "activities": [f"{o}.{a}" for o, a in sorted(self.activities)],
            "statements": [[o, a, list(p)] for o, a, p in sorted(self.statements, key=_statement_order)],
            "states": [f"{o}.{s}" for o, s in sorted(self.states)],
            "parameters": sorted(self.parameters),
            "events": sorted(self.events),
            "random": self.random,
        }


def _statement_order(key: StatementKey):
    obj, act, path = key
    return obj, act, tuple(str(p) for p in path)


def _checked(program: AbmProgram) -> AbmProgram:
    result = resolve_program(program)
    if isinstance(result, list):
        raise PreconditionError(f"cannot slice a program that does not compile: "
                                f"{result[0].reason} (line {result[0].line})")
    return result


def expression_reads(expr, self_class: Optional[str], neighbor_class: Optional[str],
                     program: AbmProgram) -> _Reads:
    reads = _Reads()
    if expr is None:
        return reads

    def position_of(class_name: Optional[str]):
        obj = program.object(class_name) if class_name else None
        if obj is not None and obj.position_state:
            reads.states.add((obj.name, obj.position_state))

    if isinstance(expr, StateRef):
        owner = self_class if expr.owner == "self" else neighbor_class
        if owner is not None:
            reads.states.add((owner, expr.name))
    elif isinstance(expr, ParamRef):
        reads.params.add(expr.name)
    elif isinstance(expr, EventCount):
        reads.events.add(expr.event)
    elif isinstance(expr, CountNeighbors):
        position_of(self_class)
        reads.update(expression_reads(expr.radius, self_class, neighbor_class, program))
        reads.update(expression_reads(expr.predicate, self_class, self_class, program))
        return reads
    elif isinstance(expr, (CountAll, SumAll)):
        inner = expr.predicate if isinstance(expr, CountAll) else expr.value
        reads.update(expression_reads(inner, self_class, expr.object_name, program))
        return reads
    elif isinstance(expr, Distance):
        position_of(self_class)
        position_of(neighbor_class)
    elif isinstance(expr, Call):
        if expr.func in RANDOM_CALLS:
            reads.random = True
        if expr.func == "nearby_cell":
            position_of(self_class)
    for child in child_expressions(expr):
        reads.update(expression_reads(child, self_class, neighbor_class, program))
    return reads


@dataclass(frozen=True)
class _Writer:
    key: StatementKey
    enclosing: List[StatementKey]
    writes_state: Optional[StateKey]
    writes_event: Optional[str]
    reads: _Reads
    draws: bool = False  # its own expression takes values from the stream


def collect_writers(program: AbmProgram) -> List[_Writer]:
    program = _checked(program)
    writers: List[_Writer] = []
    for obj in program.objects:
        for activity in obj.activities:
            schedule_reads = _Reads()
            for step in program.schedule:
                if (step.object_name, step.activity_name) == (obj.name, activity.name):
                    schedule_reads.update(expression_reads(step.condition, obj.name, None, program))
                    # execution order comes from the stream
                    schedule_reads.random = schedule_reads.random or step.kind in SHUFFLED

            def visit(body, path, guards: _Reads, enclosing: List[StatementKey], neighbor: Optional[str]):
                for index, stmt in enumerate(body):
                    here = path + (index,)
                    key = (obj.name, activity.name, here)
                    if isinstance(stmt, Assign):
                        own = expression_reads(stmt.value, obj.name, neighbor, program)
                        reads = _Reads()
                        reads.update(guards)
                        reads.update(own)
                        owner = obj.name  # neighbors are instances of the same class
                        writers.append(_Writer(key, list(enclosing), (owner, stmt.target.name), None,
                                               reads, own.random))
                    elif isinstance(stmt, Emit):
                        reads = _Reads()
                        reads.update(guards)
                        writers.append(_Writer(key, list(enclosing), None, stmt.event, reads))
                    elif isinstance(stmt, If):
                        own = expression_reads(stmt.condition, obj.name, neighbor, program)
                        inner = _Reads()
                        inner.update(guards)
                        inner.update(own)
                        if own.random:
                            writers.append(_Writer(key, list(enclosing), None, None, inner, True))
                        visit(stmt.then, here + ("then",), inner, enclosing + [key], neighbor)
                        visit(stmt.orelse, here + ("else",), inner, enclosing + [key], neighbor)
                    elif isinstance(stmt, ForNeighbor):
                        own = expression_reads(stmt.radius, obj.name, neighbor, program)
                        inner = _Reads()
                        inner.update(guards)
                        inner.update(own)
                        if obj.position_state:
                            inner.states.add((obj.name, obj.position_state))
                        if own.random:
                            writers.append(_Writer(key, list(enclosing), None, None, inner, True))
                        visit(stmt.body, here + ("body",), inner, enclosing + [key], obj.name)

            visit(activity.body, (), schedule_reads, [], None)
    return writers


def _count_reads(program: AbmProgram, object_name: str) -> _Reads:
    init = program.init_for(object_name)
    if init is None:
        return _Reads()
    return expression_reads(init.count, None, None, program)


def _initial_reads(program: AbmProgram, states: Iterable[StateKey]) -> _Reads:
    """Reads of the initial-value expressions and instance counts behind some states"""
    reads = _Reads()
    for object_name, state_name in states:
        obj = program.object(object_name)
        decl = obj.state(state_name) if obj else None
        if decl is not None:
            reads.update(expression_reads(decl.default, object_name, None, program))
        reads.update(_count_reads(program, object_name))
    return reads


def _stream_reads(program: AbmProgram, writers: List[_Writer]) -> _Reads:
    """What decides how many values the stream hands out outside the drawing statements"""
    reads = _Reads()
    for step in program.schedule:
        condition = expression_reads(step.condition, step.object_name, None, program)
        if step.kind in SHUFFLED or condition.random:
            reads.update(condition)
            reads.update(_count_reads(program, step.object_name))
    for obj in program.objects:
        if any(expression_reads(decl.default, obj.name, None, program).random for decl in obj.states):
            reads.update(_count_reads(program, obj.name))
    for writer in writers:
        if writer.draws:
            reads.update(_count_reads(program, writer.key[0]))
    return reads


def backward_slice(program: AbmProgram, metric: str) -> SliceResult:
    program = _checked(program)
    recorder = program.recorder(metric)
    if recorder is None:
        raise UnknownMetric(f"no recorder named {metric}")

    closure = expression_reads(recorder.expr, None, None, program)
    writers = collect_writers(program)
    included: Set[StatementKey] = set()
    stream_joined = False

    def size():
        return (len(closure.states), len(closure.params), len(closure.events), len(included),
                closure.random)

    while True:
        before = size()
        closure.update(_initial_reads(program, set(closure.states)))
        if closure.random and not stream_joined:
            closure.update(_stream_reads(program, writers))
            stream_joined = True
        for writer in writers:
            if writer.key in included:
                continue
            if (writer.writes_state in closure.states or writer.writes_event in closure.events
                    or (writer.draws and closure.random)):
                included.add(writer.key)
                included.update(writer.enclosing)
                closure.update(writer.reads)
        if size() == before:
            break

    return SliceResult(
        metric=metric,
        statements=frozenset(included),
        states=frozenset(closure.states),
        parameters=frozenset(closure.params),
        events=frozenset(closure.events),
        random=closure.random,
    )
