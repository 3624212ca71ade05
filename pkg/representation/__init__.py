# representation/__init__.py
"""Representation documents package for SAGE"""

from .documents import (
    ConceptualRepresentation,
    Criterion,
    ObjectiveRepresentation,
    ObjectSpec,
    ScheduleDirective,
    load_conceptual,
    load_objective,
    parse_conceptual,
    parse_objective,
    render_conceptual
)

__all__ = [
    'ConceptualRepresentation',
    'Criterion',
    'ObjectiveRepresentation',
    'ObjectSpec',
    'ScheduleDirective',
    'load_conceptual',
    'load_objective',
    'parse_conceptual',
    'parse_objective',
    'render_conceptual'
]
