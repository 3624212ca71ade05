# simulation/__init__.py
"""Simulation package for SAGE"""

from .engine import ModelRandom, simulate
from .trace import SimulationTrace, snapshot_metrics

__all__ = [
    'ModelRandom',
    'SimulationTrace',
    'simulate',
    'snapshot_metrics'
]
