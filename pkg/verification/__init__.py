# verification/__init__.py
"""Verification package for SAGE"""

from .criteria import CriterionPredicate, Verdict, compile_criteria, evaluate, evaluate_seeds, parse_predicate
from .level1 import check_program, is_elaborate, is_executable
from .slicing import SliceResult, backward_slice

__all__ = [
    'CriterionPredicate',
    'SliceResult',
    'Verdict',
    'backward_slice',
    'check_program',
    'compile_criteria',
    'evaluate',
    'evaluate_seeds',
    'is_elaborate',
    'is_executable',
    'parse_predicate'
]
