"""
Shared pytest fixtures
File: conftest.py
"""

import sys
from pathlib import Path

import pytest

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.append(str(project_root))

from representation.documents import load_conceptual, load_objective  # noqa: E402

CORPUS_DIR = project_root / "corpus"
FIXTURES_DIR = project_root / "fixtures"


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture
def epidemic_dir() -> Path:
    return CORPUS_DIR / "epidemic"


@pytest.fixture
def epidemic_source(epidemic_dir) -> str:
    return (epidemic_dir / "reference.abm").read_text(encoding="utf-8")


@pytest.fixture
def epidemic_scenario(epidemic_dir):
    return load_conceptual(epidemic_dir / "scenario.json")


@pytest.fixture
def epidemic_objective(epidemic_dir):
    return load_objective(epidemic_dir / "objective.json")


@pytest.fixture
def tiny_source() -> str:
    return (FIXTURES_DIR / "tiny_infection.abm").read_text(encoding="utf-8")


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    """No SAGE_* variables and no ./sage.toml in the working directory"""
    import os
    for name in list(os.environ):
        if name.startswith("SAGE_"):
            monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)
    return tmp_path
