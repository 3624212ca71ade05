"""
Run artifact directory and interaction ledger for SAGE
File: database/run_store.py

Layout of runs/<id>/:
  NN-<kind>.prompt.txt, NN-<kind>.response.txt   every generator interaction
  ledger.db                                      sqlite index of interactions and rounds
  outcome.json                                   machine-readable run summary
  sage.log                                       DEBUG log of the run
"""

import json
import sqlite3
import threading
import uuid
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config.settings import PIPELINE_CONFIG
from utils.logging_config import attach_run_log, detach_run_log, get_logger

logger = get_logger("run_store")


def new_run_id(command: str = "run") -> str:
    return f"{datetime.now().strftime('%Y%m%d-%H%M%S')}-{command}-{uuid.uuid4().hex[:6]}"


class RunStore:
    def __init__(self, runs_dir: Union[str, Path] = PIPELINE_CONFIG["runs_dir"],
                 run_id: Optional[str] = None, command: str = "run"):
        self.run_id = run_id or new_run_id(command)
        self.command = command
        self.path = Path(runs_dir) / self.run_id
        self.db_path = self.path / "ledger.db"
        self._sequence = 0
        self._lock = threading.Lock()
        self._log_handler = None
        self._ensure_run_directory()
        self._initialize_database()

    def _ensure_run_directory(self):
        """Ensure the run directory exists"""
        self.path.mkdir(parents=True, exist_ok=True)

    def _initialize_database(self):
        """Initialize the ledger with required tables"""
        with self.get_connection() as conn:
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    run_id TEXT PRIMARY KEY,
                    command TEXT NOT NULL,
                    started_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                    finished_at TIMESTAMP,
                    success BOOLEAN
                )
            """)

            # One row per prompt; the response columns fill in when it arrives
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS interactions (
                    seq INTEGER PRIMARY KEY,
                    kind TEXT NOT NULL,
                    attempt INTEGER NOT NULL,
                    prompt_digest TEXT NOT NULL,
                    prompt_file TEXT NOT NULL,
                    response_file TEXT,
                    slots JSON,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS rounds (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    stage TEXT CHECK (stage IN ('modeling', 'solving', 'inner')),
                    iteration INTEGER NOT NULL,
                    summary JSON NOT NULL,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            """)

            cursor.execute("INSERT OR IGNORE INTO runs (run_id, command) VALUES (?, ?)",
                           (self.run_id, self.command))
            conn.commit()

    @contextmanager
    def get_connection(self):
        """Context manager for ledger connections"""
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            conn.close()

    # Logging

    @property
    def log_path(self) -> Path:
        return self.path / "sage.log"

    def start_logging(self):
        if self._log_handler is None:
            self._log_handler = attach_run_log(self.log_path)

    def stop_logging(self):
        if self._log_handler is not None:
            detach_run_log(self._log_handler)
            self._log_handler = None

    # Generator interactions

    def record_prompt(self, prompt, attempt: int = 1) -> int:
        """Write NN-<kind>.prompt.txt before the backend is called; returns NN"""
        with self._lock:
            self._sequence += 1
            seq = self._sequence
        kind = prompt.kind.value
        prompt_file = f"{seq:02d}-{kind}.prompt.txt"
        (self.path / prompt_file).write_text(prompt.text, encoding="utf-8")
        with self.get_connection() as conn:
            conn.execute("""
                INSERT INTO interactions (seq, kind, attempt, prompt_digest, prompt_file, slots)
                VALUES (?, ?, ?, ?, ?, ?)
            """, (seq, kind, attempt, prompt.digest, prompt_file, json.dumps(sorted(prompt.slots))))
            conn.commit()
        return seq

    def record_response(self, seq: int, prompt, raw: str):
        response_file = f"{seq:02d}-{prompt.kind.value}.response.txt"
        (self.path / response_file).write_text(raw, encoding="utf-8")
        with self.get_connection() as conn:
            conn.execute("UPDATE interactions SET response_file = ? WHERE seq = ?", (response_file, seq))
            conn.commit()

    def interactions(self) -> List[Dict[str, Any]]:
        with self.get_connection() as conn:
            cursor = conn.execute("SELECT * FROM interactions ORDER BY seq")
            return [dict(row) for row in cursor.fetchall()]

    # Pipeline rounds

    def record_round(self, stage: str, iteration: int, summary: Dict[str, Any]):
        with self.get_connection() as conn:
            conn.execute("INSERT INTO rounds (stage, iteration, summary) VALUES (?, ?, ?)",
                         (stage, iteration, json.dumps(summary, sort_keys=True)))
            conn.commit()

    def rounds(self, stage: Optional[str] = None) -> List[Dict[str, Any]]:
        query = "SELECT stage, iteration, summary FROM rounds"
        params = ()
        if stage is not None:
            query += " WHERE stage = ?"
            params = (stage,)
        with self.get_connection() as conn:
            rows = conn.execute(query + " ORDER BY id", params).fetchall()
        return [{"stage": r["stage"], "iteration": r["iteration"], "summary": json.loads(r["summary"])}
                for r in rows]

    # Outcome

    def write_outcome(self, outcome: Dict[str, Any]) -> Path:
        path = self.path / "outcome.json"
        path.write_text(json.dumps(outcome, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        with self.get_connection() as conn:
            conn.execute("UPDATE runs SET finished_at = CURRENT_TIMESTAMP, success = ? WHERE run_id = ?",
                         (bool(outcome.get("success")), self.run_id))
            conn.commit()
        logger.info("Run %s finished; outcome written to %s", self.run_id, path)
        return path

    def write_artifact(self, name: str, text: str) -> Path:
        path = self.path / name
        path.write_text(text, encoding="utf-8")
        return path
