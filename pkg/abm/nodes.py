"""
Immutable syntax tree for .abm programs
File: abm/nodes.py

Every node carries the 1-based source line it came from; lines never take part
in equality so that parse(print(p)) == p holds structurally.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, Optional, Tuple, Union

STATE_TYPES = ("bool", "int", "real", "position")


class ScheduleKind(str, Enum):
    DO = "do"
    RANDOM_DO = "random_do"
    CONDITIONAL_DO = "conditional_do"
    RANDOM_CONDITIONAL_DO = "random_conditional_do"

    @property
    def is_conditional(self) -> bool:
        return self in (ScheduleKind.CONDITIONAL_DO, ScheduleKind.RANDOM_CONDITIONAL_DO)

    @property
    def is_random(self) -> bool:
        return self in (ScheduleKind.RANDOM_DO, ScheduleKind.RANDOM_CONDITIONAL_DO)


# Expressions

@dataclass(frozen=True)
class Literal:
    value: Union[bool, int, float, str]
    line: int = field(default=0, compare=False)
    # True == 1 == 1.0 in Python; the type tag keeps literals of different types apart
    type: str = field(default="", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "type", literal_type(self.value))


@dataclass(frozen=True)
class Name:
    """A bare identifier before resolution"""
    name: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class StateRef:
    name: str
    owner: str = "self"  # "self" or "neighbor"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ParamRef:
    name: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class InstanceId:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / < <= == != >= > and or
    left: "Expr"
    right: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class UnaryOp:
    op: str  # - not
    operand: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    """bernoulli, uniform, randint, cell, random_cell, nearby_cell"""
    func: str
    args: Tuple["Expr", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CountNeighbors:
    radius: "Expr"
    predicate: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CountAll:
    object_name: str
    predicate: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SumAll:
    object_name: str
    value: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Distance:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class EventCount:
    event: str
    line: int = field(default=0, compare=False)


Expr = Union[Literal, Name, StateRef, ParamRef, InstanceId, BinOp, UnaryOp, Call,
             CountNeighbors, CountAll, SumAll, Distance, EventCount]


# Statements

@dataclass(frozen=True)
class Assign:
    target: Union[Name, StateRef]
    value: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    condition: Expr
    then: Tuple["Statement", ...]
    orelse: Tuple["Statement", ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ForNeighbor:
    radius: Expr
    body: Tuple["Statement", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Emit:
    event: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Todo:
    line: int = field(default=0, compare=False)


Statement = Union[Assign, If, ForNeighbor, Emit, Todo]


# Declarations

@dataclass(frozen=True)
class StateDecl:
    name: str
    type: str
    default: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Activity:
    name: str
    body: Tuple[Statement, ...]
    line: int = field(default=0, compare=False)

    @property
    def is_placeholder(self) -> bool:
        return any(isinstance(stmt, Todo) for stmt in self.body)


@dataclass(frozen=True)
class ObjectClass:
    name: str
    states: Tuple[StateDecl, ...]
    activities: Tuple[Activity, ...]
    line: int = field(default=0, compare=False)

    def state(self, name: str) -> Optional[StateDecl]:
        return next((s for s in self.states if s.name == name), None)

    def activity(self, name: str) -> Optional[Activity]:
        return next((a for a in self.activities if a.name == name), None)

    @property
    def position_state(self) -> Optional[str]:
        return next((s.name for s in self.states if s.type == "position"), None)


@dataclass(frozen=True)
class InitSpec:
    """Instance count for one object class; the RNG seed is bound at simulate()"""
    object_name: str
    count: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ScheduleStep:
    kind: ScheduleKind
    object_name: str
    activity_name: str
    condition: Optional[Expr] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Recorder:
    metric: str
    expr: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    value: Union[int, float]
    line: int = field(default=0, compare=False)
    type: str = field(default="", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "type", literal_type(self.value))


@dataclass(frozen=True)
class AbmProgram:
    """A parsed model. Parameters and inits are maps, kept sorted by name."""

    name: str
    params: Tuple[Param, ...] = ()
    grid: Tuple[int, int] = (10, 10)
    objects: Tuple[ObjectClass, ...] = ()
    inits: Tuple[InitSpec, ...] = ()
    schedule: Tuple[ScheduleStep, ...] = ()
    recorders: Tuple[Recorder, ...] = ()
    # set by the type checker once every name is bound
    resolved: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(sorted(self.params, key=lambda p: p.name)))
        object.__setattr__(self, "inits", tuple(sorted(self.inits, key=lambda i: i.object_name)))

    @property
    def parameters(self) -> Dict[str, Union[int, float]]:
        return {p.name: p.value for p in self.params}

    def object(self, name: str) -> Optional[ObjectClass]:
        return next((o for o in self.objects if o.name == name), None)

    def recorder(self, metric: str) -> Optional[Recorder]:
        return next((r for r in self.recorders if r.metric == metric), None)

    def init_for(self, object_name: str) -> Optional[InitSpec]:
        return next((i for i in self.inits if i.object_name == object_name), None)


def literal_type(value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "real"
    return "str"


def child_expressions(expr: Expr) -> Tuple[Expr, ...]:
    if isinstance(expr, BinOp):
        return (expr.left, expr.right)
    if isinstance(expr, UnaryOp):
        return (expr.operand,)
    if isinstance(expr, Call):
        return expr.args
    if isinstance(expr, CountNeighbors):
        return (expr.radius, expr.predicate)
    if isinstance(expr, CountAll):
        return (expr.predicate,)
    if isinstance(expr, SumAll):
        return (expr.value,)
    return ()


def walk_expression(expr: Expr) -> Iterator[Expr]:
    yield expr
    for child in child_expressions(expr):
        yield from walk_expression(child)


def walk_statements(body: Tuple[Statement, ...], path: Tuple = ()) -> Iterator[Tuple[Tuple, Statement]]:
    """Yield (path, statement) pairs, depth first; paths index into nested bodies"""
    for index, stmt in enumerate(body):
        here = path + (index,)
        yield here, stmt
        if isinstance(stmt, If):
            yield from walk_statements(stmt.then, here + ("then",))
            yield from walk_statements(stmt.orelse, here + ("else",))
        elif isinstance(stmt, ForNeighbor):
            yield from walk_statements(stmt.body, here + ("body",))
