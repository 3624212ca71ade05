"""
Recursive-descent parser for .abm programs
File: abm/parser.py

The parser plays the compiler's role for verifier-level1: it never raises on
bad input, every lexical, syntax and semantic problem comes back as a
compilation-error Defect. Panic-mode recovery resynchronises on statement,
member and declaration keywords so one pass can report several defects.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple, Union

from abm.defects import Defect, compilation_error
from abm.lexer import Token, tokenize
from abm.nodes import (
    AbmProgram, Activity, Assign, BinOp, Call, CountAll, CountNeighbors, Distance,
    Emit, EventCount, ForNeighbor, If, InitSpec, InstanceId, Literal, Name, ObjectClass,
    Param, Recorder, ScheduleKind, ScheduleStep, StateDecl, StateRef, SumAll,
    Todo, UnaryOp,
)

DECL_KEYWORDS = frozenset({"model", "param", "grid", "object", "init", "schedule", "record"})
MEMBER_KEYWORDS = frozenset({"state", "activity"})
STATEMENT_KEYWORDS = frozenset({"todo", "if", "for", "emit"})
SCHEDULE_KINDS = {kind.value: kind for kind in ScheduleKind}
COMPARISONS = ("<", "<=", "==", "!=", ">=", ">")

# builtin name -> (node factory, arity); arguments are plain expressions
SIMPLE_CALLS = {
    "bernoulli": 1,
    "uniform": 2,
    "randint": 2,
    "cell": 2,
    "random_cell": 0,
    "nearby_cell": 1,
}


class _ParseError(Exception):
    def __init__(self, token: Token, reason: str):
        self.token = token
        self.reason = reason
        super().__init__(reason)


@dataclass
class SyntaxResult:
    """Raw (unresolved) program plus every lexical/syntax defect found"""

    program: Optional[AbmProgram]
    defects: List[Defect] = field(default_factory=list)
    damaged: Set[Tuple[str, str]] = field(default_factory=set)

    @property
    def ok(self) -> bool:
        return not self.defects


class Parser:
    def __init__(self, tokens: List[Token]):
        last_line = tokens[-1].line if tokens else 1
        self.tokens = tokens + [Token("eof", "<end of input>", last_line, 1)]
        self.pos = 0
        self.defects: List[Defect] = []
        self.damaged: Set[Tuple[str, str]] = set()
        self._current_activity: Optional[Tuple[str, str]] = None

    # Token helpers

    def peek(self, offset: int = 0) -> Token:
        index = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self) -> Token:
        token = self.peek()
        if token.kind != "eof":
            self.pos += 1
        return token

    def at(self, kind: str, text: str = None) -> bool:
        return self.peek().is_(kind, text)

    def at_keyword(self, *words: str) -> bool:
        token = self.peek()
        return token.kind == "keyword" and token.text in words

    def accept(self, kind: str, text: str = None) -> Optional[Token]:
        if self.at(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str = None, what: str = None) -> Token:
        if self.at(kind, text):
            return self.advance()
        token = self.peek()
        wanted = what or (f"'{text}'" if text else kind)
        raise _ParseError(token, f"expected {wanted}, found '{token.text}'")

    def ident(self, what: str = "an identifier") -> Token:
        return self.expect("ident", what=what)

    def error(self, token: Token, reason: str):
        self.defects.append(compilation_error(token.line, token.text, reason))
        if self._current_activity is not None:
            self.damaged.add(self._current_activity)

    # Recovery

    def _skip_until(self, stop, start: int):
        """Skip tokens (at least one if no progress was made) until stop(token) at depth 0"""
        if self.pos == start and not stop(self.peek()) and not self.at("eof"):
            self.advance()
        depth = 0
        while not self.at("eof"):
            token = self.peek()
            if depth == 0 and stop(token):
                return
            if token.is_("punct", "{"):
                depth += 1
            elif token.is_("punct", "}"):
                if depth == 0:
                    return
                depth -= 1
            self.advance()

    @staticmethod
    def _is_structure(token: Token) -> bool:
        return token.kind == "keyword" and token.text in DECL_KEYWORDS | MEMBER_KEYWORDS

    def _starts_statement(self, token: Token) -> bool:
        if token.kind == "keyword" and token.text in STATEMENT_KEYWORDS:
            return True
        if token.kind == "keyword" and token.text == "neighbor":
            return True
        # only ever called on the current token
        return token.kind == "ident" and self.peek(1).kind == "assign"

    # Program

    def program(self) -> AbmProgram:
        name = "unnamed"
        if self.accept("keyword", "model"):
            try:
                name = self.ident("a model name").text
            except _ParseError as exc:
                self.error(exc.token, exc.reason)
        else:
            self.error(self.peek(), "a program must start with 'model <name>'")

        params: List[Param] = []
        grid: List[Tuple[int, int]] = []
        objects: List[ObjectClass] = []
        inits: List[InitSpec] = []
        schedule: List[ScheduleStep] = []
        recorders: List[Recorder] = []

        while not self.at("eof"):
            start = self.pos
            try:
                token = self.peek()
                if token.is_("keyword", "param"):
                    params.append(self.param_decl())
                elif token.is_("keyword", "grid"):
                    grid.append(self.grid_decl())
                elif token.is_("keyword", "object"):
                    objects.append(self.object_decl())
                elif token.is_("keyword", "init"):
                    inits.append(self.init_decl())
                elif token.is_("keyword", "schedule"):
                    schedule.append(self.schedule_decl())
                elif token.is_("keyword", "record"):
                    recorders.append(self.record_decl())
                elif token.is_("keyword", "model"):
                    raise _ParseError(token, "duplicate model declaration")
                else:
                    raise _ParseError(token, f"expected a declaration, found '{token.text}'")
            except _ParseError as exc:
                self.error(exc.token, exc.reason)
                self._skip_until(lambda t: t.kind == "keyword" and t.text in DECL_KEYWORDS, start)

        if len(grid) > 1:
            self.defects.append(compilation_error(
                self.tokens[-1].line, "grid", "duplicate grid declaration"))
        return AbmProgram(
            name=name,
            params=tuple(params),
            grid=grid[-1] if grid else (10, 10),
            objects=tuple(objects),
            inits=tuple(inits),
            schedule=tuple(schedule),
            recorders=tuple(recorders),
        )

    def param_decl(self) -> Param:
        line = self.advance().line
        name = self.ident("a parameter name").text
        self.expect("op", "=")
        negative = bool(self.accept("op", "-"))
        token = self.peek()
        if token.kind == "int":
            value: Union[int, float] = int(self.advance().text)
        elif token.kind == "real":
            value = float(self.advance().text)
        else:
            raise _ParseError(token, f"parameter {name} needs a numeric value")
        return Param(name, -value if negative else value, line=line)

    def grid_decl(self) -> Tuple[int, int]:
        self.advance()
        width = self.expect("int", what="a grid width")
        self.expect("keyword", "by")
        height = self.expect("int", what="a grid height")
        if int(width.text) < 1 or int(height.text) < 1:
            raise _ParseError(width, "grid dimensions must be at least 1")
        return int(width.text), int(height.text)

    def object_decl(self) -> ObjectClass:
        line = self.advance().line
        name = self.ident("an object name").text
        self.expect("punct", "{")
        states: List[StateDecl] = []
        activities: List[Activity] = []
        while not self.at("punct", "}"):
            token = self.peek()
            if token.kind == "eof" or (token.kind == "keyword" and token.text in DECL_KEYWORDS):
                self.error(token, f"missing '}}' closing object {name}")
                break
            start = self.pos
            try:
                if token.is_("keyword", "state"):
                    states.append(self.state_decl())
                elif token.is_("keyword", "activity"):
                    activities.append(self.activity_decl(name))
                else:
                    raise _ParseError(token, f"expected 'state' or 'activity' in object {name}")
            except _ParseError as exc:
                self.error(exc.token, exc.reason)
                self._skip_until(self._is_structure, start)
        else:
            self.advance()
        return ObjectClass(name, tuple(states), tuple(activities), line=line)

    def state_decl(self) -> StateDecl:
        line = self.advance().line
        name = self.ident("a state name").text
        self.expect("punct", ":")
        type_token = self.peek()
        if not (type_token.kind == "keyword" and type_token.text in ("bool", "int", "real", "position")):
            raise _ParseError(type_token, f"unknown state type '{type_token.text}'")
        self.advance()
        self.expect("op", "=", what="'=' and an initial value")
        return StateDecl(name, type_token.text, self.expression(), line=line)

    def activity_decl(self, object_name: str) -> Activity:
        line = self.advance().line
        name = self.ident("an activity name").text
        self._current_activity = (object_name, name)
        try:
            body = self.block()
        finally:
            self._current_activity = None
        return Activity(name, body, line=line)

    def init_decl(self) -> InitSpec:
        line = self.advance().line
        name = self.ident("an object name").text
        self.expect("keyword", "count")
        return InitSpec(name, self.expression(), line=line)

    def schedule_decl(self) -> ScheduleStep:
        line = self.advance().line
        token = self.peek()
        if not (token.kind == "keyword" and token.text in SCHEDULE_KINDS):
            raise _ParseError(token, f"unknown schedule primitive '{token.text}'")
        self.advance()
        object_name = self.ident("an object name").text
        self.expect("punct", ".")
        activity_name = self.ident("an activity name").text
        condition = None
        if self.accept("keyword", "when"):
            condition = self.expression()
        return ScheduleStep(SCHEDULE_KINDS[token.text], object_name, activity_name, condition, line=line)

    def record_decl(self) -> Recorder:
        line = self.advance().line
        metric = self.ident("a metric name").text
        self.expect("op", "=")
        return Recorder(metric, self.expression(), line=line)

    # Statements

    def block(self) -> tuple:
        self.expect("punct", "{")
        body = []
        while not self.at("punct", "}"):
            token = self.peek()
            if token.kind == "eof" or self._is_structure(token):
                self.error(token, "missing '}' closing block")
                return tuple(body)
            start = self.pos
            try:
                body.append(self.statement())
            except _ParseError as exc:
                self.error(exc.token, exc.reason)
                self._skip_until(lambda t: self._starts_statement(t) or self._is_structure(t), start)
        self.advance()
        return tuple(body)

    def statement(self):
        token = self.peek()
        if token.is_("keyword", "todo"):
            self.advance()
            return Todo(line=token.line)
        if token.is_("keyword", "emit"):
            self.advance()
            return Emit(self.ident("an event name").text, line=token.line)
        if token.is_("keyword", "if"):
            self.advance()
            condition = self.expression()
            then = self.block()
            orelse = ()
            if self.accept("keyword", "else"):
                orelse = self.block()
            return If(condition, then, orelse, line=token.line)
        if token.is_("keyword", "for"):
            self.advance()
            self.expect("keyword", "neighbor")
            self.expect("keyword", "within")
            radius = self.expression()
            return ForNeighbor(radius, self.block(), line=token.line)
        if token.kind == "ident":
            self.advance()
            self.expect("assign", what="':='")
            return Assign(Name(token.text, line=token.line), self.expression(), line=token.line)
        if token.is_("keyword", "neighbor"):
            self.advance()
            self.expect("punct", ".")
            name = self.ident("a state name")
            self.expect("assign", what="':='")
            target = StateRef(name.text, "neighbor", line=token.line)
            return Assign(target, self.expression(), line=token.line)
        raise _ParseError(token, f"expected a statement, found '{token.text}'")

    # Expressions

    def expression(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at_keyword("or"):
            token = self.advance()
            left = BinOp("or", left, self.and_expr(), line=token.line)
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.at_keyword("and"):
            token = self.advance()
            left = BinOp("and", left, self.not_expr(), line=token.line)
        return left

    def not_expr(self):
        if self.at_keyword("not"):
            token = self.advance()
            return UnaryOp("not", self.not_expr(), line=token.line)
        return self.comparison()

    def comparison(self):
        left = self.additive()
        token = self.peek()
        if token.kind == "op" and token.text in COMPARISONS:
            self.advance()
            left = BinOp(token.text, left, self.additive(), line=token.line)
            after = self.peek()
            if after.kind == "op" and after.text in COMPARISONS:
                raise _ParseError(after, "comparisons cannot be chained")
        return left

    def additive(self):
        left = self.term()
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            token = self.advance()
            left = BinOp(token.text, left, self.term(), line=token.line)
        return left

    def term(self):
        left = self.unary()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            token = self.advance()
            left = BinOp(token.text, left, self.unary(), line=token.line)
        return left

    def unary(self):
        if self.at("op", "-"):
            token = self.advance()
            return UnaryOp("-", self.unary(), line=token.line)
        return self.primary()

    def primary(self):
        token = self.peek()
        if token.kind == "int":
            self.advance()
            return Literal(int(token.text), line=token.line)
        if token.kind == "real":
            self.advance()
            return Literal(float(token.text), line=token.line)
        if token.kind == "bool":
            self.advance()
            return Literal(token.text == "true", line=token.line)
        if token.kind == "string":
            self.advance()
            return Literal(token.text[1:-1], line=token.line)
        if token.kind == "ident":
            self.advance()
            return Name(token.text, line=token.line)
        if token.is_("punct", "("):
            self.advance()
            inner = self.expression()
            self.expect("punct", ")")
            return inner
        if token.kind == "keyword":
            return self.keyword_primary(token)
        raise _ParseError(token, f"expected an expression, found '{token.text}'")

    def keyword_primary(self, token: Token):
        word = token.text
        if word == "neighbor":
            self.advance()
            self.expect("punct", ".")
            return StateRef(self.ident("a state name").text, "neighbor", line=token.line)
        if word == "id":
            self.advance()
            return InstanceId(line=token.line)
        if word == "self":
            raise _ParseError(token, "'self' is only valid in distance(self, neighbor)")
        if word in SIMPLE_CALLS:
            self.advance()
            args = self.arguments(word, SIMPLE_CALLS[word])
            return Call(word, tuple(args), line=token.line)
        if word == "count_neighbors":
            self.advance()
            radius, predicate = self.arguments(word, 2)
            return CountNeighbors(radius, predicate, line=token.line)
        if word in ("count_all", "sum_all"):
            self.advance()
            self.expect("punct", "(")
            object_name = self.ident("an object name").text
            self.expect("punct", ",")
            inner = self.expression()
            self.expect("punct", ")")
            node = CountAll if word == "count_all" else SumAll
            return node(object_name, inner, line=token.line)
        if word == "distance":
            self.advance()
            self.expect("punct", "(")
            self.expect("keyword", "self")
            self.expect("punct", ",")
            self.expect("keyword", "neighbor")
            self.expect("punct", ")")
            return Distance(line=token.line)
        if word == "event_count":
            self.advance()
            self.expect("punct", "(")
            event = self.ident("an event name").text
            self.expect("punct", ")")
            return EventCount(event, line=token.line)
        raise _ParseError(token, f"expected an expression, found keyword '{word}'")

    def arguments(self, func: str, arity: int) -> list:
        open_token = self.expect("punct", "(")
        args = []
        if not self.at("punct", ")"):
            args.append(self.expression())
            while self.accept("punct", ","):
                args.append(self.expression())
        self.expect("punct", ")")
        if len(args) != arity:
            plural = "argument" if arity == 1 else "arguments"
            raise _ParseError(open_token, f"{func} expects {arity} {plural}, got {len(args)}")
        return args


def parse_syntax(source: str) -> SyntaxResult:
    """Lex and parse without name resolution or type checking"""
    tokens, lexical = tokenize(source)
    parser = Parser(tokens)
    program = parser.program()
    defects = sorted(lexical + parser.defects, key=lambda d: d.line)
    return SyntaxResult(program, defects, parser.damaged)


def parse_statements(text: str) -> Tuple[tuple, List[Defect]]:
    """Parse a bare statement sequence, as carried by patch directives"""
    tokens, lexical = tokenize(text)
    parser = Parser(tokens)
    body = []
    while not parser.at("eof"):
        start = parser.pos
        try:
            body.append(parser.statement())
        except _ParseError as exc:
            parser.error(exc.token, exc.reason)
            parser._skip_until(parser._starts_statement, start)
    return tuple(body), lexical + parser.defects


def parse_expression(text: str):
    """Parse a single expression; returns (expr or None, defects)"""
    tokens, lexical = tokenize(text)
    parser = Parser(tokens)
    try:
        expr = parser.expression()
        if not parser.at("eof"):
            raise _ParseError(parser.peek(), f"unexpected '{parser.peek().text}' after expression")
    except _ParseError as exc:
        parser.error(exc.token, exc.reason)
        expr = None
    return expr, lexical + parser.defects


def parse_program(source: str) -> Union[AbmProgram, List[Defect]]:
    """Parse and type-check; returns the program or every compilation defect"""
    from abm.checker import check_types

    result = parse_syntax(source)
    if not result.ok:
        return result.defects
    program, defects = check_types(result.program)
    if defects:
        return defects
    return program


def resolve_program(program: AbmProgram) -> Union[AbmProgram, List[Defect]]:
    """Checked form of a program assembled outside the parser, e.g. by patching"""
    if program.resolved:
        return program
    from abm.printer import print_program

    return parse_program(print_program(program))


__all__ = ["Parser", "SyntaxResult", "parse_syntax", "parse_statements",
           "parse_expression", "parse_program", "resolve_program"]
