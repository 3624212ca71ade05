"""
Tests for the modeling and solving pipelines
File: tests/test_pipeline.py
"""

import json
import shutil

import pytest

from database.run_store import RunStore
from errors import FixtureMiss, InnerRepairExhausted, PredicateParseError, PreconditionError
from representation.documents import load_conceptual, parse_objective
from services.generator_service import MockBackend, fenced
from services.pipeline_service import run_modeling, run_solving
from verification.level1 import check_program

MODELING_ITERATIONS = {
    "epidemic": 1,
    "forest_fire": 0,
    "opinion_dynamics": 5,
    "rumor_spread": 2,
    "traffic_flow": 3,
    "wealth_exchange": 6,
}


def _modeling(sample_dir, budget=10, store=None):
    rep = load_conceptual(sample_dir / "scenario.json")
    return rep, run_modeling(rep, MockBackend(sample_dir / "fixtures"), budget, store)


def _fixtures(tmp_path, epidemic_dir, **files):
    """Copy of the epidemic fixtures with some files replaced"""
    target = tmp_path / "fixtures"
    shutil.copytree(epidemic_dir / "fixtures", target)
    for name, text in files.items():
        (target / f"{name}.txt").write_text(text, encoding="utf-8")
    return target


def _patch(*directives):
    return fenced("patch", json.dumps(list(directives)))


# Modeling

@pytest.mark.parametrize("sample, iterations", sorted(MODELING_ITERATIONS.items()))
def test_modeling_repairs_every_sample(corpus_dir, sample, iterations):
    rep, outcome = _modeling(corpus_dir / sample)
    assert outcome.success
    assert outcome.iterations_used == iterations
    assert len(outcome.history) == iterations + 1
    assert outcome.defects == []
    assert check_program(outcome.source, rep) == []
    assert outcome.source == (corpus_dir / sample / "reference.abm").read_text(encoding="utf-8")
    assert outcome.program is not None
    assert outcome.first_attempt.iteration == 0


def test_modeling_budget_exhaustion_returns_best_round(corpus_dir):
    _, outcome = _modeling(corpus_dir / "opinion_dynamics", budget=2)
    assert not outcome.success
    assert outcome.iterations_used == 2
    counts = [len(r.defects) for r in outcome.history]
    assert len(outcome.defects) == min(counts)
    assert outcome.to_dict()["final_defects"] == [d.to_dict() for d in outcome.defects]


def test_modeling_needs_a_budget(corpus_dir):
    with pytest.raises(PreconditionError):
        _modeling(corpus_dir / "epidemic", budget=0)


def test_modeling_fixture_miss_names_the_iteration(tmp_path, epidemic_dir, epidemic_scenario):
    shutil.copy(epidemic_dir / "fixtures" / "gen_abm.txt", tmp_path / "gen_abm.txt")
    with pytest.raises(FixtureMiss) as info:
        run_modeling(epidemic_scenario, MockBackend(tmp_path), 3)
    assert info.value.iteration == 1


def test_modeling_rounds_are_recorded(tmp_path, corpus_dir):
    store = RunStore(tmp_path, run_id="modeling")
    _, outcome = _modeling(corpus_dir / "rumor_spread", store=store)
    assert [r["iteration"] for r in store.rounds("modeling")] == [r.iteration for r in outcome.history]
    assert [r["kind"] for r in store.interactions()] == ["gen_abm", "rectify_defects", "rectify_defects"]


# Solving

def test_epidemic_is_solved_in_one_iteration(epidemic_dir, epidemic_objective, epidemic_source):
    outcome = run_solving(epidemic_objective, epidemic_source, MockBackend(epidemic_dir / "fixtures"),
                          budget=5, seed=0, steps=20)
    assert outcome.success
    assert outcome.iterations_used == 1
    assert outcome.failure_cause is None
    assert outcome.verdict.satisfying_flag
    assert [s.title for s in outcome.solutions] == ["enforce quarantine", "promote vaccination"]
    assert len(outcome.directives) == 6
    assert outcome.traces[0].series["spread_rate"] == [0.08] * 20
    assert outcome.baseline[0].series["spread_rate"] == [1.0] * 20
    assert [p.text for p in outcome.predicates] == ["final(spread_rate) < 0.1", "unchanged(spread_distance)"]
    assert "activity vaccinate" in outcome.source
    data = outcome.to_dict()
    assert data["success"] is True and "failure_cause" not in data
    assert [r["iteration"] for r in data["history"]] == [0, 1]


def test_solving_over_several_seeds(epidemic_dir, epidemic_objective, epidemic_source):
    outcome = run_solving(epidemic_objective, epidemic_source, MockBackend(epidemic_dir / "fixtures"),
                          steps=10, seeds=[0, 1, 2])
    assert outcome.success
    assert outcome.seeds == (0, 1, 2)
    assert [t.seed for t in outcome.traces] == [0, 1, 2]


def test_already_satisfied_objective_needs_no_iteration(tmp_path, epidemic_source):
    (tmp_path / "gen_verification.txt").write_text(fenced("predicate", "final(spread_distance) < 5"))
    objective = parse_objective(json.dumps({
        "problem": "keep the spread distance small",
        "criteria": [{"variable_name": "spread_distance", "requirement": "below 5"}],
    }))
    outcome = run_solving(objective, epidemic_source, MockBackend(tmp_path), steps=5)
    assert outcome.success
    assert outcome.iterations_used == 0
    assert outcome.directives == []
    assert outcome.source == epidemic_source


def test_unhelpful_patch_exhausts_the_budget(tmp_path, epidemic_dir, epidemic_objective, epidemic_source):
    fixtures = _fixtures(tmp_path, epidemic_dir, modify=_patch(
        {"op": "set_parameter", "name": "recovery_probability", "value": 0.0}))
    outcome = run_solving(epidemic_objective, epidemic_source, MockBackend(fixtures), budget=2, steps=10)
    assert not outcome.success
    assert outcome.iterations_used == 2
    assert outcome.failure_cause == "criteria_unmet"
    assert [r.cause for r in outcome.history[1:]] == ["criteria_unmet", "criteria_unmet"]
    # nothing beat the baseline, so the original program comes back
    assert outcome.source == epidemic_source
    assert outcome.directives == []


def test_rejected_patch_is_an_execution_failure(tmp_path, epidemic_dir, epidemic_objective, epidemic_source):
    fixtures = _fixtures(tmp_path, epidemic_dir, modify=_patch(
        {"op": "remove_state", "object": "person", "name": "mood"}))
    outcome = run_solving(epidemic_objective, epidemic_source, MockBackend(fixtures), budget=2, steps=5)
    assert not outcome.success
    assert outcome.failure_cause == "execution"
    assert all(r.cause == "execution" for r in outcome.history[1:])
    assert "patch rejected" in outcome.history[1].verdict.note


def test_runtime_fault_is_an_execution_failure(tmp_path, epidemic_dir, epidemic_objective, epidemic_source):
    fixtures = _fixtures(tmp_path, epidemic_dir, modify=_patch(
        {"op": "set_parameter", "name": "infection_probability", "value": 2.0}))
    outcome = run_solving(epidemic_objective, epidemic_source, MockBackend(fixtures), budget=1, steps=5)
    assert outcome.failure_cause == "execution"
    assert outcome.history[1].verdict.note.startswith("runtime fault")
    assert outcome.history[1].verdict.satisfied_count == 0


def test_inner_repair_exhaustion_carries_the_partial_outcome(tmp_path, epidemic_dir, epidemic_objective,
                                                             epidemic_source):
    fixtures = _fixtures(tmp_path, epidemic_dir, modify=_patch(
        {"op": "replace_activity", "object": "person", "name": "move", "body": "pos := ghost_cell"}))
    store = RunStore(tmp_path / "runs", run_id="inner")
    with pytest.raises(InnerRepairExhausted) as info:
        run_solving(epidemic_objective, epidemic_source, MockBackend(fixtures),
                    steps=5, inner_budget=2, store=store)
    partial = info.value.outcome
    assert not partial.success
    assert partial.failure_cause == "execution"
    assert partial.history[-1].repair_rounds == 2
    assert partial.source == epidemic_source
    assert len(store.rounds("inner")) == 2


def test_solving_needs_a_clean_program(epidemic_objective, epidemic_source, epidemic_dir):
    broken = epidemic_source.replace("pos := nearby_cell(1)", "todo")
    with pytest.raises(PreconditionError):
        run_solving(epidemic_objective, broken, MockBackend(epidemic_dir / "fixtures"))
    with pytest.raises(PreconditionError):
        run_solving(epidemic_objective, epidemic_source, MockBackend(epidemic_dir / "fixtures"), budget=0)


def test_unparseable_predicates_stop_solving(tmp_path, epidemic_dir, epidemic_objective, epidemic_source):
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir()
    (fixtures / "gen_verification.txt").write_text(fenced("predicate", "the spread should be low"))
    with pytest.raises(PredicateParseError):
        run_solving(epidemic_objective, epidemic_source, MockBackend(fixtures), steps=5)


def test_missing_cot_fixture_names_the_iteration(tmp_path, epidemic_dir, epidemic_objective, epidemic_source):
    fixtures = _fixtures(tmp_path, epidemic_dir)
    (fixtures / "cot.txt").unlink()
    with pytest.raises(FixtureMiss) as info:
        run_solving(epidemic_objective, epidemic_source, MockBackend(fixtures), steps=5)
    assert info.value.iteration == 1
