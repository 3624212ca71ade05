"""
Reweighted CodeBLEU for .abm programs
File: evaluation/codebleu.py

Four components, each in [0, 1]:
  ngram           4-gram BLEU (uniform weights, brevity penalty) over token texts
  weighted_ngram  the same precisions with DSL keywords weighted double
  ast_match       share of reference subtrees found in the candidate, with
                  identifiers blanked so only structure and literals count
  dataflow_match  share of reference def-use edges found in the candidate,
                  states numbered by declaration position
"""

import math
from collections import Counter
from dataclasses import dataclass, fields, is_dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Set, Tuple, Union

from nltk.translate.bleu_score import SmoothingFunction, sentence_bleu
from nltk.util import ngrams

from abm.lexer import KEYWORDS, tokenize
from abm.nodes import AbmProgram
from abm.parser import parse_program
from abm.printer import print_program
from config.settings import EVAL_CONFIG
from errors import InvalidWeights
from verification.slicing import collect_writers

NGRAM_ORDER = 4
COMPONENTS = ("ngram", "weighted_ngram", "ast_match", "dataflow_match")

# fields holding user-chosen names; blanked for structural comparison
_NAME_FIELDS = frozenset({"name", "object_name", "activity_name", "metric", "event"})
# declaration-order-free collections, compared as sorted multisets
_UNORDERED_FIELDS = frozenset({"params", "inits"})
_BLANK = "_"


@dataclass(frozen=True)
class CodeBleuScore:
    ngram: float
    weighted_ngram: float
    ast_match: float
    dataflow_match: float
    weights: Tuple[float, float, float, float]

    @property
    def components(self) -> Tuple[float, float, float, float]:
        return self.ngram, self.weighted_ngram, self.ast_match, self.dataflow_match

    @property
    def total(self) -> float:
        return math.fsum(w * c for w, c in zip(self.weights, self.components))

    def to_dict(self):
        return {
            "ngram": self.ngram,
            "weighted_ngram": self.weighted_ngram,
            "ast_match": self.ast_match,
            "dataflow_match": self.dataflow_match,
            "weights": list(self.weights),
            "total": self.total,
        }


def validate_weights(weights: Sequence[float]) -> Tuple[float, float, float, float]:
    weights = tuple(float(w) for w in weights)
    if len(weights) != 4:
        raise InvalidWeights(f"expected 4 weights, got {len(weights)}")
    if any(w < 0 for w in weights):
        raise InvalidWeights(f"weights must be non-negative: {weights}")
    if abs(math.fsum(weights) - 1.0) > 1e-12:
        raise InvalidWeights(f"weights must sum to 1, got {math.fsum(weights)!r}")
    return weights


# Lexical components

def program_tokens(program: Union[AbmProgram, str]) -> List[str]:
    source = print_program(program) if isinstance(program, AbmProgram) else program
    tokens, _ = tokenize(source)
    return [t.text for t in tokens]


def ngram_match(candidate: Sequence[str], reference: Sequence[str]) -> float:
    if not candidate or not reference:
        return 0.0
    return float(sentence_bleu([list(reference)], list(candidate),
                               weights=(1.0 / NGRAM_ORDER,) * NGRAM_ORDER,
                               smoothing_function=SmoothingFunction().method1))


def _token_weight(token: str) -> float:
    return EVAL_CONFIG["keyword_weight"] if token in KEYWORDS else 1.0


def weighted_ngram_match(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Clipped n-gram precisions where an n-gram weighs the mean of its token weights"""
    if not candidate or not reference:
        return 0.0
    log_sum = 0.0
    for order in range(1, NGRAM_ORDER + 1):
        hyp = Counter(ngrams(candidate, order))
        ref = Counter(ngrams(reference, order))
        total = math.fsum(sum(_token_weight(t) for t in g) / order * c for g, c in hyp.items())
        if total == 0:
            return 0.0
        matched = math.fsum(sum(_token_weight(t) for t in g) / order * min(c, ref[g])
                            for g, c in hyp.items())
        # same epsilon smoothing as the plain n-gram component
        precision = matched / total if matched > 0 else 0.1 / total
        log_sum += math.log(precision) / NGRAM_ORDER
    c, r = len(candidate), len(reference)
    brevity = 1.0 if c > r else math.exp(1 - r / c)
    return brevity * math.exp(log_sum)


# Structural components

def _shape(node):
    if is_dataclass(node):
        parts = [type(node).__name__]
        for f in fields(node):
            if not f.compare or not f.init:
                continue
            value = getattr(node, f.name)
            if f.name in _NAME_FIELDS:
                parts.append(_BLANK)
            elif f.name in _UNORDERED_FIELDS:
                parts.append(("seq",) + tuple(sorted((_shape(v) for v in value), key=repr)))
            else:
                parts.append(_shape(value))
        return tuple(parts)
    if isinstance(node, tuple):
        return ("seq",) + tuple(_shape(v) for v in node)
    if isinstance(node, Enum):
        return node.value
    return node


def subtrees(program: AbmProgram) -> Counter:
    """Multiset of every subtree of depth >= 2 (a node with at least one child)"""
    found: Counter = Counter()

    def visit(shape):
        if isinstance(shape, tuple):
            if len(shape) > 1:
                found[shape] += 1
            for child in shape[1:]:
                visit(child)

    visit(_shape(program))
    return found


def ast_match(candidate: AbmProgram, reference: AbmProgram) -> float:
    ref = subtrees(reference)
    total = sum(ref.values())
    if total == 0:
        return 1.0
    cand = subtrees(candidate)
    return sum(min(count, cand[shape]) for shape, count in ref.items()) / total


def dataflow_edges(program: AbmProgram) -> Set[Tuple[Tuple[int, int], Tuple[int, int]]]:
    """(read state, written state) pairs, each state as (object index, state index)"""
    position = {}
    for i, obj in enumerate(program.objects):
        for j, decl in enumerate(obj.states):
            position[(obj.name, decl.name)] = (i, j)
    edges = set()
    for writer in collect_writers(program):
        if writer.writes_state is None or writer.writes_state not in position:
            continue
        for read in writer.reads.states:
            if read in position:
                edges.add((position[read], position[writer.writes_state]))
    return edges


def dataflow_match(candidate: AbmProgram, reference: AbmProgram) -> float:
    ref = dataflow_edges(reference)
    cand = dataflow_edges(candidate)
    if not ref:
        return 1.0 if not cand else 0.0
    return len(ref & cand) / len(ref)


def _resolved(program: Union[AbmProgram, str]) -> Optional[AbmProgram]:
    if isinstance(program, AbmProgram):
        return program
    parsed = parse_program(program)
    return None if isinstance(parsed, list) else parsed


def codebleu(candidate: Union[AbmProgram, str], reference: Union[AbmProgram, str],
             weights: Iterable[float] = EVAL_CONFIG["weights"]) -> CodeBleuScore:
    """
    Score a candidate against a reference. Sources that do not compile still
    get the lexical components; their structural components are 0.
    """
    weights = validate_weights(list(weights))
    cand_tokens, ref_tokens = program_tokens(candidate), program_tokens(reference)
    cand_program, ref_program = _resolved(candidate), _resolved(reference)
    if cand_program is not None and ref_program is not None:
        structure = ast_match(cand_program, ref_program), dataflow_match(cand_program, ref_program)
    else:
        structure = (0.0, 0.0)
    return CodeBleuScore(
        ngram=ngram_match(cand_tokens, ref_tokens),
        weighted_ngram=weighted_ngram_match(cand_tokens, ref_tokens),
        ast_match=structure[0],
        dataflow_match=structure[1],
        weights=weights,
    )
