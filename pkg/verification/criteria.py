"""
Verifier-level2: criterion predicates over simulation traces
File: verification/criteria.py

Predicate language:

    pred  := pred "or" pred | pred "and" pred | "not" pred | "(" pred ")"
           | agg CMP number | "unchanged" "(" metric ["," number] ")"
    agg   := final(m) | max(m) | min(m) | mean(m) | last_k_mean(m, k)
    CMP   := < <= == != >= >
"""

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from abm.lexer import Token, tokenize
from abm.nodes import AbmProgram
from errors import MissingMetric, PredicateParseError, SeriesLengthMismatch, UnknownMetricError
from representation.documents import Criterion, ObjectiveRepresentation
from utils.logging_config import get_logger

logger = get_logger("verifier2")

AGGREGATES = ("final", "max", "min", "mean", "last_k_mean")
COMPARATORS = ("<", "<=", "==", "!=", ">=", ">")
REAL_RELATIVE_TOLERANCE = 1e-9


# Predicate tree

@dataclass(frozen=True)
class Aggregate:
    func: str
    metric: str
    k: Optional[int] = None

    def __str__(self) -> str:
        if self.func == "last_k_mean":
            return f"last_k_mean({self.metric}, {self.k})"
        return f"{self.func}({self.metric})"


@dataclass(frozen=True)
class Comparison:
    aggregate: Aggregate
    op: str
    value: float

    def __str__(self) -> str:
        return f"{self.aggregate} {self.op} {_number(self.value)}"


@dataclass(frozen=True)
class Unchanged:
    metric: str
    tolerance: Optional[float] = None

    def __str__(self) -> str:
        if self.tolerance is None:
            return f"unchanged({self.metric})"
        return f"unchanged({self.metric}, {_number(self.tolerance)})"


@dataclass(frozen=True)
class Not:
    operand: "Predicate"

    def __str__(self) -> str:
        inner = str(self.operand)
        if isinstance(self.operand, BoolOp):
            inner = f"({inner})"
        return f"not {inner}"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and / or
    left: "Predicate"
    right: "Predicate"

    def __str__(self) -> str:
        def side(p, strict):
            text = str(p)
            if isinstance(p, BoolOp) and (p.op != self.op or strict):
                return f"({text})"
            return text
        return f"{side(self.left, False)} {self.op} {side(self.right, True)}"


Predicate = Union[Comparison, Unchanged, Not, BoolOp]


def _number(value: float) -> str:
    return repr(float(value))


def metrics_of(pred: Predicate) -> List[str]:
    if isinstance(pred, Comparison):
        return [pred.aggregate.metric]
    if isinstance(pred, Unchanged):
        return [pred.metric]
    if isinstance(pred, Not):
        return metrics_of(pred.operand)
    return metrics_of(pred.left) + metrics_of(pred.right)


# Parsing

class _PredicateParser:
    def __init__(self, text: str):
        tokens, defects = tokenize(text)
        if defects:
            raise PredicateParseError(defects[0].reason)
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> Token:
        token = self.peek()
        if token is None:
            raise PredicateParseError("unexpected end of predicate")
        self.pos += 1
        return token

    def expect(self, kind: str, text: str = None) -> Token:
        token = self.advance()
        if not token.is_(kind, text):
            raise PredicateParseError(f"expected {text or kind}, found '{token.text}'")
        return token

    def at_word(self, word: str) -> bool:
        token = self.peek()
        return token is not None and token.text == word and token.kind in ("keyword", "ident")

    def parse(self) -> Predicate:
        if not self.tokens:
            raise PredicateParseError("empty predicate")
        pred = self.or_pred()
        if self.peek() is not None:
            raise PredicateParseError(f"unexpected '{self.peek().text}' after predicate")
        return pred

    def or_pred(self) -> Predicate:
        left = self.and_pred()
        while self.at_word("or"):
            self.advance()
            left = BoolOp("or", left, self.and_pred())
        return left

    def and_pred(self) -> Predicate:
        left = self.not_pred()
        while self.at_word("and"):
            self.advance()
            left = BoolOp("and", left, self.not_pred())
        return left

    def not_pred(self) -> Predicate:
        if self.at_word("not"):
            self.advance()
            return Not(self.not_pred())
        return self.atom()

    def atom(self) -> Predicate:
        token = self.peek()
        if token is None:
            raise PredicateParseError("unexpected end of predicate")
        if token.is_("punct", "("):
            self.advance()
            inner = self.or_pred()
            self.expect("punct", ")")
            return inner
        if self.at_word("unchanged"):
            self.advance()
            self.expect("punct", "(")
            metric = self.metric()
            tolerance = None
            if self.peek() is not None and self.peek().is_("punct", ","):
                self.advance()
                tolerance = self.number()
                if tolerance < 0:
                    raise PredicateParseError("unchanged tolerance must not be negative")
            self.expect("punct", ")")
            return Unchanged(metric, tolerance)
        aggregate = self.aggregate()
        op = self.advance()
        if op.kind != "op" or op.text not in COMPARATORS:
            raise PredicateParseError(f"expected a comparison after {aggregate}, found '{op.text}'")
        return Comparison(aggregate, op.text, self.number())

    def aggregate(self) -> Aggregate:
        token = self.advance()
        if token.text not in AGGREGATES:
            raise PredicateParseError(f"expected an aggregate ({', '.join(AGGREGATES)}), found '{token.text}'")
        self.expect("punct", "(")
        metric = self.metric()
        k = None
        if token.text == "last_k_mean":
            self.expect("punct", ",")
            k_token = self.expect("int")
            k = int(k_token.text)
            if k < 1:
                raise PredicateParseError("last_k_mean needs k >= 1")
        self.expect("punct", ")")
        return Aggregate(token.text, metric, k)

    def metric(self) -> str:
        token = self.advance()
        if token.kind not in ("ident", "keyword"):
            raise PredicateParseError(f"expected a metric name, found '{token.text}'")
        return token.text

    def number(self) -> float:
        negative = False
        if self.peek() is not None and self.peek().is_("op", "-"):
            self.advance()
            negative = True
        token = self.advance()
        if token.kind not in ("int", "real"):
            raise PredicateParseError(f"expected a number, found '{token.text}'")
        value = float(token.text)
        return -value if negative else value


def parse_predicate(text: str) -> Predicate:
    return _PredicateParser(text.strip()).parse()


# Compilation through the generator

@dataclass(frozen=True)
class CriterionPredicate:
    criterion: Criterion
    expr: Predicate

    @property
    def text(self) -> str:
        return str(self.expr)


def _criterion_slots(objective: ObjectiveRepresentation, criterion: Criterion,
                     program: AbmProgram, feedback: str) -> Dict[str, str]:
    return {
        "problem": objective.problem,
        "variable_name": criterion.variable_name,
        "variable_example": json.dumps(criterion.variable_example),
        "requirement": criterion.requirement,
        "metrics": ", ".join(r.metric for r in program.recorders) or "(none)",
        "feedback": feedback,
    }


def compile_criteria(objective: ObjectiveRepresentation, generator, program: AbmProgram) -> List[CriterionPredicate]:
    """Ask the generator for one predicate per criterion; one re-prompt on parse failure"""
    from services.generator_service import PromptKind, render_prompt

    recorded = {r.metric for r in program.recorders}
    compiled: List[CriterionPredicate] = []
    for criterion in objective.criteria:
        feedback = ""
        for attempt in (1, 2):
            prompt = render_prompt(PromptKind.GEN_VERIFICATION,
                                   _criterion_slots(objective, criterion, program, feedback))
            text = generator.generate(prompt).payload
            try:
                expr = parse_predicate(text)
                break
            except PredicateParseError as exc:
                logger.warning("Predicate for %s did not parse (attempt %d): %s",
                               criterion.variable_name, attempt, exc)
                if attempt == 2:
                    raise PredicateParseError(
                        f"criterion {criterion.variable_name}: {exc} in {text!r}") from exc
                feedback = (f"Your previous answer `{text.strip()}` is not in the predicate "
                            f"language: {exc}. Answer again.")
        unknown = [m for m in metrics_of(expr) if m not in recorded]
        if unknown:
            raise UnknownMetricError(
                f"criterion {criterion.variable_name}: predicate references unrecorded metric "
                f"{', '.join(sorted(set(unknown)))}")
        logger.info("Compiled criterion %s -> %s", criterion.variable_name, expr)
        compiled.append(CriterionPredicate(criterion, expr))
    return compiled


# Evaluation

@dataclass
class CriterionResult:
    variable_name: str
    predicate: str
    satisfied: bool
    observed: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variable_name": self.variable_name,
            "predicate": self.predicate,
            "satisfied": self.satisfied,
            "observed": self.observed,
        }


@dataclass
class Verdict:
    per_criterion: List[CriterionResult]
    note: Optional[str] = None

    @property
    def satisfying_flag(self) -> bool:
        return all(r.satisfied for r in self.per_criterion)

    @property
    def satisfied_count(self) -> int:
        return sum(1 for r in self.per_criterion if r.satisfied)

    def to_dict(self) -> Dict[str, Any]:
        record = {
            "satisfying_flag": self.satisfying_flag,
            "criteria": [r.to_dict() for r in self.per_criterion],
        }
        if self.note:
            record["note"] = self.note
        return record

    @classmethod
    def failed(cls, preds: Sequence[CriterionPredicate], note: str) -> "Verdict":
        """Every criterion unsatisfied, e.g. when the candidate could not be simulated"""
        return cls([CriterionResult(p.criterion.variable_name, p.text, False) for p in preds], note)


def aggregate_value(aggregate: Aggregate, series: Sequence[float]):
    if len(series) == 0:
        return None
    values = np.asarray(series)
    if aggregate.func == "final":
        result = values[-1]
    elif aggregate.func == "max":
        result = values.max()
    elif aggregate.func == "min":
        result = values.min()
    elif aggregate.func == "mean":
        result = values.mean(dtype=np.float64)
    else:
        result = values[-aggregate.k:].mean(dtype=np.float64)
    return result.item()


def _compare(observed, op: str, value: float) -> bool:
    return {
        "<": observed < value,
        "<=": observed <= value,
        "==": observed == value,
        "!=": observed != value,
        ">=": observed >= value,
        ">": observed > value,
    }[op]


def _series(trace, metric: str, which: str):
    series = trace.series.get(metric)
    if series is None:
        raise MissingMetric(f"metric {metric} missing from the {which} trace")
    return series


def _unchanged(pred: Unchanged, candidate, baseline, observed: Dict[str, Any]) -> bool:
    new = _series(candidate, pred.metric, "candidate")
    old = _series(baseline, pred.metric, "baseline")
    if len(new) != len(old):
        raise SeriesLengthMismatch(
            f"metric {pred.metric}: candidate has {len(new)} values, baseline {len(old)}")
    diffs = [abs(a - b) for a, b in zip(new, old)]
    observed[str(pred)] = max(diffs) if diffs else 0
    if pred.tolerance is not None:
        return all(d <= pred.tolerance for d in diffs)
    if all(isinstance(v, int) for v in list(new) + list(old)):
        return all(d == 0 for d in diffs)
    return all(math.isclose(a, b, rel_tol=REAL_RELATIVE_TOLERANCE, abs_tol=0.0) for a, b in zip(new, old))


def _holds(pred: Predicate, candidate, baseline, observed: Dict[str, Any]) -> bool:
    if isinstance(pred, Comparison):
        value = aggregate_value(pred.aggregate, _series(candidate, pred.aggregate.metric, "candidate"))
        observed[str(pred.aggregate)] = value
        return value is not None and _compare(value, pred.op, pred.value)
    if isinstance(pred, Unchanged):
        return _unchanged(pred, candidate, baseline, observed)
    if isinstance(pred, Not):
        return not _holds(pred.operand, candidate, baseline, observed)
    # evaluate both sides so every observation is reported
    left = _holds(pred.left, candidate, baseline, observed)
    right = _holds(pred.right, candidate, baseline, observed)
    return (left and right) if pred.op == "and" else (left or right)


def evaluate(preds: Sequence[CriterionPredicate], candidate, baseline) -> Verdict:
    results = []
    for pred in preds:
        observed: Dict[str, Any] = {}
        satisfied = _holds(pred.expr, candidate, baseline, observed)
        results.append(CriterionResult(pred.criterion.variable_name, pred.text, satisfied, observed))
    return Verdict(results)


def evaluate_seeds(preds: Sequence[CriterionPredicate], candidates: Sequence, baselines: Sequence) -> Verdict:
    """Conjunction over seeds; observations come from the first seed that fails, else the first seed"""
    verdicts = [evaluate(preds, c, b) for c, b in zip(candidates, baselines)]
    merged = []
    for index in range(len(preds)):
        column = [v.per_criterion[index] for v in verdicts]
        failing = next((r for r in column if not r.satisfied), None)
        chosen = failing or column[0]
        merged.append(CriterionResult(chosen.variable_name, chosen.predicate, failing is None, chosen.observed))
    return Verdict(merged)
