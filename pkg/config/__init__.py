# config/__init__.py
"""Configuration package for SAGE"""

from .settings import (
    APP_CONFIG,
    EVAL_CONFIG,
    GENERATOR_CONFIG,
    PIPELINE_CONFIG,
    SIMULATION_CONFIG,
    RunConfig,
    load_run_config
)

__all__ = [
    'APP_CONFIG',
    'EVAL_CONFIG',
    'GENERATOR_CONFIG',
    'PIPELINE_CONFIG',
    'SIMULATION_CONFIG',
    'RunConfig',
    'load_run_config'
]
