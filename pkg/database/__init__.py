# database/__init__.py
"""Run artifact storage package for SAGE"""

from .run_store import RunStore, new_run_id

__all__ = ['RunStore', 'new_run_id']
