"""
Tests for the run directory and its ledger
File: tests/test_run_store.py
"""

import json
import sqlite3

from database.run_store import RunStore
from services.generator_service import Generator, MockBackend, PromptKind, fenced, render_prompt
from utils.logging_config import get_logger


def _prompt(scenario="{}"):
    return render_prompt(PromptKind.GEN_ABM, {"scenario": scenario})


def test_run_directory_and_tables(tmp_path):
    store = RunStore(tmp_path, command="model")
    assert store.path.parent == tmp_path
    assert "-model-" in store.run_id
    with sqlite3.connect(store.db_path) as conn:
        tables = {row[0] for row in conn.execute("SELECT name FROM sqlite_master WHERE type = 'table'")}
        command = conn.execute("SELECT command FROM runs").fetchone()[0]
    assert {"runs", "interactions", "rounds"} <= tables
    assert command == "model"


def test_prompt_and_response_files(tmp_path):
    store = RunStore(tmp_path, run_id="r1")
    prompt = _prompt()
    seq = store.record_prompt(prompt)
    store.record_response(seq, prompt, "raw answer")
    assert seq == 1
    assert (store.path / "01-gen_abm.prompt.txt").read_text(encoding="utf-8") == prompt.text
    assert (store.path / "01-gen_abm.response.txt").read_text(encoding="utf-8") == "raw answer"
    [row] = store.interactions()
    assert row["kind"] == "gen_abm"
    assert row["prompt_digest"] == prompt.digest
    assert row["response_file"] == "01-gen_abm.response.txt"
    assert json.loads(row["slots"]) == ["scenario"]


def test_generator_persists_every_attempt(tmp_path):
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir()
    (fixtures / "gen_abm.1.txt").write_text("no block here")
    (fixtures / "gen_abm.2.txt").write_text(fenced("abm", "model m"))
    store = RunStore(tmp_path / "runs", run_id="r2")
    Generator(MockBackend(fixtures), store).generate(_prompt())
    rows = store.interactions()
    assert [(r["seq"], r["attempt"]) for r in rows] == [(1, 1), (2, 2)]
    assert (store.path / "01-gen_abm.response.txt").read_text(encoding="utf-8") == "no block here"
    assert (store.path / "02-gen_abm.response.txt").exists()


def test_rounds_by_stage(tmp_path):
    store = RunStore(tmp_path, run_id="r3")
    store.record_round("modeling", 0, {"defects": 2})
    store.record_round("solving", 1, {"satisfied": 0})
    store.record_round("modeling", 1, {"defects": 0})
    assert [r["iteration"] for r in store.rounds("modeling")] == [0, 1]
    assert store.rounds("solving") == [{"stage": "solving", "iteration": 1, "summary": {"satisfied": 0}}]
    assert len(store.rounds()) == 3


def test_outcome_and_artifacts(tmp_path):
    store = RunStore(tmp_path, run_id="r4")
    path = store.write_outcome({"success": True, "budget": 10})
    assert path.read_text(encoding="utf-8") == '{\n  "budget": 10,\n  "success": true\n}\n'
    with sqlite3.connect(store.db_path) as conn:
        success, finished = conn.execute("SELECT success, finished_at FROM runs").fetchone()
    assert success == 1 and finished is not None
    assert store.write_artifact("final.abm", "model m\n").read_text(encoding="utf-8") == "model m\n"


def test_run_log_collects_debug_records(tmp_path):
    store = RunStore(tmp_path, run_id="r5")
    store.start_logging()
    get_logger("test").debug("inside the run")
    store.stop_logging()
    get_logger("test").debug("after the run")
    text = store.log_path.read_text(encoding="utf-8")
    assert "sage.test" in text and "inside the run" in text
    assert "after the run" not in text


def test_reopening_a_run_keeps_its_ledger(tmp_path):
    RunStore(tmp_path, run_id="again").record_round("inner", 0, {})
    assert len(RunStore(tmp_path, run_id="again").rounds("inner")) == 1
