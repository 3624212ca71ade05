"""
Tests for corpus evaluation and its reports
File: tests/test_corpus.py
"""

import json
import shutil
from dataclasses import replace
from pathlib import Path

import pytest

from config.settings import RunConfig
from errors import DocumentError
from evaluation.corpus import evaluate_corpus, iteration_bin, load_corpus, load_sample, report_to_json
from services.generator_service import MockBackend
from utils.export_utils import render_corpus_report

GOLDEN = Path(__file__).parent / "golden" / "eval_report.json"
CORPUS_DIR = Path(__file__).parent.parent / "corpus"


def _mock(sample):
    return MockBackend(sample.fixtures_dir)


@pytest.fixture(scope="module")
def report():
    return evaluate_corpus(CORPUS_DIR, _mock, RunConfig())


def test_report_matches_golden(report):
    assert json.loads(report_to_json(report)) == json.loads(GOLDEN.read_text(encoding="utf-8"))


def test_report_is_deterministic_across_worker_counts(report, corpus_dir):
    serial = evaluate_corpus(corpus_dir, _mock, replace(RunConfig(), max_in_flight=1))
    assert report_to_json(serial) == report_to_json(report)


def test_modeling_summary(report):
    modeling = report["modeling"]
    assert [s["name"] for s in modeling["samples"]] == sorted(s["name"] for s in modeling["samples"])
    assert modeling["success_rate"] == 100.0
    assert sum(modeling["iteration_histogram"].values()) == modeling["sample_count"]


def test_epidemic_solution_is_substantive(report):
    [sample] = report["solving"]["samples"]
    assert sample["name"] == "epidemic"
    assert sample["substantive"]
    assert sample["substantiveness"]["modified_activities"] == ["person.spread"]


@pytest.mark.parametrize("iterations, success, label", [
    (0, True, "<=3"), (3, True, "<=3"), (4, True, "4-6"), (6, True, "4-6"),
    (7, True, "7-9"), (9, True, "7-9"), (10, True, ">=10"), (2, False, ">=10"),
])
def test_iteration_bin(iterations, success, label):
    assert iteration_bin(iterations, success) == label


def test_sample_needs_scenario_and_reference(tmp_path, epidemic_dir):
    shutil.copy(epidemic_dir / "scenario.json", tmp_path / "scenario.json")
    with pytest.raises(DocumentError, match="reference.abm"):
        load_sample(tmp_path)


def test_sample_without_objective(corpus_dir):
    sample = load_sample(corpus_dir / "forest_fire")
    assert sample.objective is None
    assert sample.fixtures_dir == corpus_dir / "forest_fire" / "fixtures"


def test_empty_or_missing_corpus(tmp_path):
    with pytest.raises(DocumentError):
        load_corpus(tmp_path)
    with pytest.raises(DocumentError):
        load_corpus(tmp_path / "absent")


def test_generator_failure_is_recorded_per_sample(tmp_path, epidemic_dir):
    sample = tmp_path / "corpus" / "broken"
    sample.mkdir(parents=True)
    for name in ("scenario.json", "reference.abm"):
        shutil.copy(epidemic_dir / name, sample / name)
    result = evaluate_corpus(tmp_path / "corpus", _mock, RunConfig())
    record = result["modeling"]["samples"][0]
    assert record["success"] is False
    assert record["codebleu"] is None
    assert record["error"].startswith("FixtureMiss")
    assert result["modeling"]["iteration_histogram"][">=10"] == 1
    assert "solving" not in result


def test_text_report(report):
    text = render_corpus_report(report)
    assert text.startswith("CORPUS EVALUATION REPORT\n")
    assert "Executable: 100.0% (first attempt 33.33%)" in text
    assert "SOLVING" in text and "Solved: 100.0%" in text
    assert "opinion_dynamics" in text
    assert render_corpus_report(report) == text


def test_runs_dir_gives_each_sample_a_store(tmp_path, epidemic_dir):
    shutil.copytree(epidemic_dir, tmp_path / "corpus" / "epidemic")
    result = evaluate_corpus(tmp_path / "corpus", _mock, RunConfig(), runs_dir=tmp_path / "runs")
    modeling = tmp_path / "runs" / "epidemic-modeling"
    solving = tmp_path / "runs" / "epidemic-solving"
    assert json.loads((modeling / "outcome.json").read_text(encoding="utf-8"))["success"] is True
    assert (modeling / "01-gen_abm.prompt.txt").exists()
    assert (solving / "solution.abm").exists()
    assert json.loads((solving / "outcome.json").read_text(encoding="utf-8"))["success"] is \
        result["solving"]["samples"][0]["success"]


def test_no_runs_dir_writes_nothing(tmp_path, epidemic_dir, monkeypatch):
    shutil.copytree(epidemic_dir, tmp_path / "corpus" / "epidemic")
    monkeypatch.chdir(tmp_path)
    evaluate_corpus(tmp_path / "corpus", _mock, RunConfig())
    assert sorted(p.name for p in tmp_path.iterdir()) == ["corpus"]
