# abm/__init__.py
"""Modelling language package for SAGE"""

from .defects import Defect, DefectKind
from .lexer import Token, tokenize
from .nodes import AbmProgram, ScheduleKind
from .parser import parse_program, parse_syntax
from .patch import Directive, apply_patch, patch_program
from .printer import print_program

__all__ = [
    'AbmProgram',
    'Defect',
    'DefectKind',
    'Directive',
    'ScheduleKind',
    'Token',
    'apply_patch',
    'parse_program',
    'parse_syntax',
    'patch_program',
    'print_program',
    'tokenize'
]
