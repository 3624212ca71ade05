# utils/__init__.py
"""Utilities package for SAGE"""

from .logging_config import get_logger, setup_logging
from .export_utils import export_trace_to_csv, render_corpus_report, render_trace

__all__ = [
    'export_trace_to_csv',
    'get_logger',
    'render_corpus_report',
    'render_trace',
    'setup_logging'
]
