# services/__init__.py
"""Services package for SAGE"""

from .generator_service import Generator, MockBackend, PromptKind, RemoteBackend, create_backend
from .pipeline_service import ModelingOutcome, SolvingOutcome, run_modeling, run_solving

__all__ = [
    'Generator',
    'MockBackend',
    'ModelingOutcome',
    'PromptKind',
    'RemoteBackend',
    'SolvingOutcome',
    'create_backend',
    'run_modeling',
    'run_solving'
]
