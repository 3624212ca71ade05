"""
Deterministic simulator for .abm programs
File: simulation/engine.py

One PCG64 stream per run, consumed in schedule order. Space is a toroidal
grid with Chebyshev distance; neighbors are other instances of the same class
in ascending id order.
"""

from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from abm.nodes import (
    AbmProgram, Assign, BinOp, Call, CountAll, CountNeighbors, Distance, Emit, EventCount,
    ForNeighbor, If, InstanceId, Literal, ParamRef, ScheduleKind, StateRef, SumAll, Todo, UnaryOp,
    walk_statements,
)
from abm.parser import parse_program, resolve_program
from errors import PreconditionError, RuntimeFault
from simulation.trace import SimulationTrace
from utils.logging_config import get_logger

logger = get_logger("simulator")

Position = Tuple[int, int]


class ModelRandom:
    """Seeded stream behind every random draw of one run"""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = np.random.Generator(np.random.PCG64(seed))

    def random(self) -> float:
        return float(self._rng.random())

    def uniform(self, low: float, high: float) -> float:
        return float(self._rng.uniform(low, high))

    def integer(self, low: int, high: int) -> int:
        """Uniform integer in [low, high], both ends included"""
        return int(self._rng.integers(low, high, endpoint=True))

    def permutation(self, n: int) -> List[int]:
        return [int(i) for i in self._rng.permutation(n)]


class _Fault(Exception):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass
class Instance:
    id: int
    object_name: str
    state: Dict[str, Any]


def _coerce(value, type_name: str):
    if type_name == "real":
        return float(value)
    if type_name == "int":
        return int(value)
    return value


class World:
    def __init__(self, program: AbmProgram, seed: int):
        self.program = program
        self.width, self.height = program.grid
        self.rng = ModelRandom(seed)
        self.params = program.parameters
        self.instances: Dict[str, List[Instance]] = {}
        self.step = 0
        self.event_names = sorted({
            stmt.event
            for obj in program.objects
            for activity in obj.activities
            for _, stmt in walk_statements(activity.body)
            if isinstance(stmt, Emit)
        })
        self.step_events: Dict[str, int] = defaultdict(int)
        self.where: Tuple[str, str] = ("<init>", "count")

    # Geometry

    def wrap(self, x: int, y: int) -> Position:
        return x % self.width, y % self.height

    def distance(self, a: Position, b: Position) -> int:
        dx = abs(a[0] - b[0])
        dy = abs(a[1] - b[1])
        return max(min(dx, self.width - dx), min(dy, self.height - dy))

    def position(self, inst: Instance) -> Position:
        obj = self.program.object(inst.object_name)
        return inst.state[obj.position_state]

    def neighbors(self, inst: Instance, radius) -> List[Instance]:
        if radius < 0:
            raise _Fault(f"negative neighbor radius {radius}")
        here = self.position(inst)
        return [
            other for other in self.instances[inst.object_name]
            if other.id != inst.id and self.distance(here, self.position(other)) <= radius
        ]

    # Setup

    def populate(self):
        for obj in self.program.objects:
            self.where = ("<init>", obj.name)
            init = self.program.init_for(obj.name)
            count = self.eval(init.count, None, None) if init is not None else 0
            if count < 0:
                raise _Fault(f"negative instance count {count} for object {obj.name}")
            self.instances[obj.name] = [Instance(i, obj.name, {}) for i in range(count)]
        for obj in self.program.objects:
            for inst in self.instances[obj.name]:
                for decl in obj.states:
                    self.where = ("<init>", f"{obj.name}.{decl.name}")
                    inst.state[decl.name] = _coerce(self.eval(decl.default, inst, None), decl.type)

    # Expressions

    def eval(self, expr, inst: Optional[Instance], neighbor: Optional[Instance]):
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, StateRef):
            target = inst if expr.owner == "self" else neighbor
            return target.state[expr.name]
        if isinstance(expr, ParamRef):
            return self.params[expr.name]
        if isinstance(expr, InstanceId):
            return inst.id
        if isinstance(expr, BinOp):
            return self.binop(expr, inst, neighbor)
        if isinstance(expr, UnaryOp):
            value = self.eval(expr.operand, inst, neighbor)
            return (not value) if expr.op == "not" else -value
        if isinstance(expr, Call):
            return self.call(expr, inst, neighbor)
        if isinstance(expr, CountNeighbors):
            radius = self.eval(expr.radius, inst, neighbor)
            return sum(1 for other in self.neighbors(inst, radius)
                       if self.eval(expr.predicate, inst, other))
        if isinstance(expr, CountAll):
            return sum(1 for other in self.instances[expr.object_name]
                       if self.eval(expr.predicate, inst, other))
        if isinstance(expr, SumAll):
            total = 0
            for other in self.instances[expr.object_name]:
                value = self.eval(expr.value, inst, other)
                total += int(value) if isinstance(value, bool) else value
            return total
        if isinstance(expr, Distance):
            return self.distance(self.position(inst), self.position(neighbor))
        if isinstance(expr, EventCount):
            return self.step_events[expr.event]
        raise TypeError(f"cannot evaluate {expr!r}")

    def binop(self, expr: BinOp, inst, neighbor):
        op = expr.op
        if op == "and":
            return bool(self.eval(expr.left, inst, neighbor)) and bool(self.eval(expr.right, inst, neighbor))
        if op == "or":
            return bool(self.eval(expr.left, inst, neighbor)) or bool(self.eval(expr.right, inst, neighbor))
        left = self.eval(expr.left, inst, neighbor)
        right = self.eval(expr.right, inst, neighbor)
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                raise _Fault("division by zero")
            return left / right
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        if op == ">=":
            return left >= right
        if op == ">":
            return left > right
        raise TypeError(f"unknown operator {op}")

    def call(self, expr: Call, inst, neighbor):
        args = [self.eval(arg, inst, neighbor) for arg in expr.args]
        func = expr.func
        if func == "bernoulli":
            p = args[0]
            if not 0.0 <= p <= 1.0:
                raise _Fault(f"invalid probability {p}")
            return self.rng.random() < p
        if func == "uniform":
            return self.rng.uniform(float(args[0]), float(args[1]))
        if func == "randint":
            low, high = args
            if low > high:
                raise _Fault(f"empty randint range [{low}, {high}]")
            return self.rng.integer(low, high)
        if func == "cell":
            return self.wrap(args[0], args[1])
        if func == "random_cell":
            index = self.rng.integer(0, self.width * self.height - 1)
            return index % self.width, index // self.width
        if func == "nearby_cell":
            radius = args[0]
            if radius < 0:
                raise _Fault(f"negative nearby_cell radius {radius}")
            x, y = self.position(inst)
            dx = self.rng.integer(-radius, radius)
            dy = self.rng.integer(-radius, radius)
            return self.wrap(x + dx, y + dy)
        raise TypeError(f"unknown builtin {func}")

    # Statements

    def execute(self, body, inst: Instance, neighbor: Optional[Instance]):
        for stmt in body:
            if isinstance(stmt, Assign):
                value = self.eval(stmt.value, inst, neighbor)
                target = inst if stmt.target.owner == "self" else neighbor
                decl = self.program.object(target.object_name).state(stmt.target.name)
                target.state[stmt.target.name] = _coerce(value, decl.type)
            elif isinstance(stmt, If):
                branch = stmt.then if self.eval(stmt.condition, inst, neighbor) else stmt.orelse
                self.execute(branch, inst, neighbor)
            elif isinstance(stmt, ForNeighbor):
                radius = self.eval(stmt.radius, inst, neighbor)
                for other in self.neighbors(inst, radius):
                    self.execute(stmt.body, inst, other)
            elif isinstance(stmt, Emit):
                self.step_events[stmt.event] += 1
            elif isinstance(stmt, Todo):
                continue
            else:
                raise TypeError(f"cannot execute {stmt!r}")

    def run_step(self, activations: Dict[str, List[int]]):
        for schedule_step in self.program.schedule:
            obj_name, act_name = schedule_step.object_name, schedule_step.activity_name
            self.where = (obj_name, act_name)
            activity = self.program.object(obj_name).activity(act_name)
            population = self.instances[obj_name]
            kind = schedule_step.kind
            executed = 0
            if kind is ScheduleKind.DO:
                order = list(population)
            elif kind is ScheduleKind.RANDOM_DO:
                order = [population[i] for i in self.rng.permutation(len(population))]
            elif kind is ScheduleKind.CONDITIONAL_DO:
                order = None
                for inst in population:
                    # checked at the instance's own turn
                    if self.eval(schedule_step.condition, inst, None):
                        self.execute(activity.body, inst, None)
                        executed += 1
            else:
                selected = [inst for inst in population if self.eval(schedule_step.condition, inst, None)]
                order = [selected[i] for i in self.rng.permutation(len(selected))]
            if order is not None:
                for inst in order:
                    self.execute(activity.body, inst, None)
                executed = len(order)
            activations[f"{obj_name}.{act_name}"][self.step] += executed

    def record(self, series: Dict[str, List]):
        for recorder in self.program.recorders:
            self.where = ("<recorder>", recorder.metric)
            value = self.eval(recorder.expr, None, None)
            series[recorder.metric].append(int(value) if isinstance(value, bool) else value)

    def snapshot(self) -> Dict[str, List[Dict[str, Any]]]:
        state: Dict[str, List[Dict[str, Any]]] = {}
        for obj in self.program.objects:
            records = []
            for inst in self.instances.get(obj.name, []):
                record: Dict[str, Any] = {"id": inst.id}
                for name, value in inst.state.items():
                    record[name] = list(value) if isinstance(value, tuple) else value
                records.append(record)
            state[obj.name] = records
        return state


def simulate(program: Union[AbmProgram, str], seed: int, steps: int) -> SimulationTrace:
    """Run `steps` iterations; a pure function of (program, seed, steps)"""
    parsed = parse_program(program) if isinstance(program, str) else resolve_program(program)
    if isinstance(parsed, list):
        raise PreconditionError(f"program does not compile: {parsed[0].reason} (line {parsed[0].line})")
    program = parsed
    if steps < 0:
        raise PreconditionError(f"steps must be >= 0, got {steps}")

    world = World(program, seed)
    series: Dict[str, List] = {r.metric: [] for r in program.recorders}
    events: Dict[str, List[int]] = {name: [] for name in world.event_names}
    activations: Dict[str, List[int]] = {
        f"{s.object_name}.{s.activity_name}": [0] * steps for s in program.schedule
    }
    try:
        world.populate()
        for step in range(steps):
            world.step = step
            world.step_events = defaultdict(int)
            world.run_step(activations)
            world.record(series)
            for name in world.event_names:
                events[name].append(world.step_events[name])
    except _Fault as fault:
        object_name, activity = world.where
        logger.info("Runtime fault at step %d in %s.%s: %s", world.step, object_name, activity, fault.reason)
        raise RuntimeFault(world.step, object_name, activity, fault.reason) from None

    logger.debug("Simulated %s for %d step(s) with seed %d", program.name, steps, seed)
    return SimulationTrace(
        seed=seed,
        steps=steps,
        series=series,
        events=events,
        activations=activations,
        final_state=world.snapshot(),
    )
