"""
Corpus evaluation: modeling quality and solving effectiveness
File: evaluation/corpus.py

Corpus layout, one directory per sample:
  corpus/<sample>/scenario.json     conceptual representation
  corpus/<sample>/reference.abm     ground-truth program
  corpus/<sample>/objective.json    optional, enables solving evaluation
  corpus/<sample>/fixtures/         mock-backend responses for this sample

Given a runs directory, every sample gets its own run store per stage,
<runs_dir>/<sample>-modeling and <runs_dir>/<sample>-solving, holding the
prompts, responses and rounds of that sample.
"""

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

from abm.defects import Defect
from config.settings import EVAL_CONFIG, SIMULATION_CONFIG, RunConfig
from database.run_store import RunStore
from errors import DocumentError, GeneratorError, InnerRepairExhausted, RuntimeFault, SageError
from evaluation.codebleu import codebleu
from evaluation.substantiveness import assess_substantiveness
from representation.documents import (
    ConceptualRepresentation, ObjectiveRepresentation, load_conceptual, load_objective,
)
from services.generator_service import BaseBackend
from services.pipeline_service import run_modeling, run_solving
from simulation.engine import simulate
from utils.logging_config import get_logger
from verification.level1 import check_program, is_elaborate, is_executable

logger = get_logger("corpus")

BackendFactory = Callable[["CorpusSample"], BaseBackend]


@dataclass(frozen=True)
class CorpusSample:
    name: str
    path: Path
    representation: ConceptualRepresentation
    reference: str
    objective: Optional[ObjectiveRepresentation] = None

    @property
    def fixtures_dir(self) -> Path:
        return self.path / "fixtures"


def load_sample(path: Union[str, Path]) -> CorpusSample:
    path = Path(path)
    scenario, reference = path / "scenario.json", path / "reference.abm"
    for required in (scenario, reference):
        if not required.is_file():
            raise DocumentError(f"corpus sample is missing {required.name}", str(path))
    objective = path / "objective.json"
    return CorpusSample(
        name=path.name,
        path=path,
        representation=load_conceptual(scenario),
        reference=reference.read_text(encoding="utf-8"),
        objective=load_objective(objective) if objective.is_file() else None,
    )


def load_corpus(corpus_dir: Union[str, Path]) -> List[CorpusSample]:
    """Every sample directory, sorted by name"""
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise DocumentError("corpus directory not found", str(corpus_dir))
    samples = [load_sample(p) for p in sorted(corpus_dir.iterdir()) if p.is_dir()]
    if not samples:
        raise DocumentError("corpus holds no samples", str(corpus_dir))
    return samples


def iteration_bin(iterations_used: int, success: bool) -> str:
    """Histogram bin; a sample that never converged lands in the last bin"""
    bins = EVAL_CONFIG["iteration_bins"]
    if not success or iterations_used >= 10:
        return bins[3]
    if iterations_used <= 3:
        return bins[0]
    if iterations_used <= 6:
        return bins[1]
    return bins[2]


def _percent(count: int, total: int) -> float:
    return round(100.0 * count / total, 2) if total else 0.0


def _sample_store(runs_dir: Optional[Path], sample: CorpusSample, stage: str) -> Optional[RunStore]:
    if runs_dir is None:
        return None
    return RunStore(runs_dir, run_id=f"{sample.name}-{stage}", command=stage)


def _survives_smoke_run(source: str, defects: List[Defect], seed: int) -> bool:
    if not is_executable(defects):
        return False
    try:
        simulate(source, seed, SIMULATION_CONFIG["smoke_steps"])
    except RuntimeFault as fault:
        logger.info("Smoke simulation failed: %s", fault)
        return False
    return True


# Modeling

def _rate_sample(sample: CorpusSample, backend: BaseBackend, config: RunConfig,
                 store: Optional[RunStore] = None) -> Dict[str, Any]:
    record: Dict[str, Any] = {"name": sample.name}
    try:
        outcome = run_modeling(sample.representation, backend, config.modeling_budget, store=store)
    except GeneratorError as exc:
        logger.warning("Sample %s: generator failed at iteration %s: %s", sample.name, exc.iteration, exc)
        record.update({
            "success": False,
            "iterations_used": config.modeling_budget,
            "executable": False,
            "elaborate": False,
            "first_attempt": {"executable": False, "elaborate": False},
            "codebleu": None,
            "error": f"{type(exc).__name__}: {exc}",
        })
        _close(store, record)
        return record

    first = outcome.first_attempt
    final_defects = check_program(outcome.source, sample.representation)
    score = codebleu(outcome.source, sample.reference, config.weights)
    record.update({
        "success": outcome.success,
        "iterations_used": outcome.iterations_used,
        "executable": _survives_smoke_run(outcome.source, final_defects, config.seed),
        "elaborate": is_elaborate(final_defects),
        "first_attempt": {
            "executable": _survives_smoke_run(first.source, first.defects, config.seed),
            "elaborate": is_elaborate(first.defects),
        },
        "codebleu": {k: round(v, 4) for k, v in score.to_dict().items() if k != "weights"},
    })
    if store is not None:
        store.write_artifact("model.abm", outcome.source)
    _close(store, record)
    return record


def _close(store: Optional[RunStore], record: Dict[str, Any]):
    if store is not None:
        store.write_outcome({**record, "run_id": store.run_id})


def _map_samples(samples: Sequence[CorpusSample], work, workers: int) -> List[Dict[str, Any]]:
    """Run `work` per sample in parallel; results keep corpus order"""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [executor.submit(work, sample) for sample in samples]
        return [future.result() for future in futures]


def rate_corpus(samples: Sequence[CorpusSample], backend_factory: BackendFactory,
                config: RunConfig, runs_dir: Optional[Path] = None) -> Dict[str, Any]:
    """
    Run the modeling stage on every sample and aggregate executable and
    elaborate rates (after repair and for the first generation), mean
    CodeBLEU against the references and the repair-iteration histogram.
    """
    logger.info("Rating modeling over %d sample(s)", len(samples))
    records = _map_samples(
        samples, lambda s: _rate_sample(s, backend_factory(s), config, _sample_store(runs_dir, s, "modeling")),
        config.max_in_flight)
    total = len(records)
    histogram = {name: 0 for name in EVAL_CONFIG["iteration_bins"]}
    for record in records:
        histogram[iteration_bin(record["iterations_used"], record["success"])] += 1

    scored = [r["codebleu"] for r in records if r["codebleu"] is not None]
    mean_codebleu = {
        key: round(sum(s[key] for s in scored) / len(scored), 4) if scored else 0.0
        for key in ("ngram", "weighted_ngram", "ast_match", "dataflow_match", "total")
    }
    return {
        "sample_count": total,
        "budget": config.modeling_budget,
        "weights": list(config.weights),
        "success_rate": _percent(sum(r["success"] for r in records), total),
        "executable_rate": _percent(sum(r["executable"] for r in records), total),
        "elaborate_rate": _percent(sum(r["elaborate"] for r in records), total),
        "first_attempt_executable_rate": _percent(sum(r["first_attempt"]["executable"] for r in records), total),
        "first_attempt_elaborate_rate": _percent(sum(r["first_attempt"]["elaborate"] for r in records), total),
        "codebleu": mean_codebleu,
        "iteration_histogram": histogram,
        "samples": records,
    }


# Solving

def _solve_sample(sample: CorpusSample, backend: BaseBackend, config: RunConfig,
                  store: Optional[RunStore] = None) -> Dict[str, Any]:
    record: Dict[str, Any] = {"name": sample.name}
    try:
        outcome = run_solving(sample.objective, sample.reference, backend,
                              budget=config.solving_budget, seed=config.seed, steps=config.steps,
                              inner_budget=config.inner_budget, seeds=config.seed_list, store=store)
    except InnerRepairExhausted as exc:
        partial = exc.outcome
        record.update({"success": False, "iterations_used": partial.iterations_used,
                       "failure_cause": "execution", "substantive": False})
        _close(store, record)
        return record
    except SageError as exc:
        logger.warning("Sample %s: solving aborted: %s", sample.name, exc)
        record.update({"success": False, "iterations_used": 0, "failure_cause": "error",
                       "substantive": False, "error": f"{type(exc).__name__}: {exc}"})
        _close(store, record)
        return record

    record.update({
        "success": outcome.success,
        "iterations_used": outcome.iterations_used,
        "failure_cause": outcome.failure_cause,
        "substantive": False,
    })
    if outcome.success and outcome.traces:
        report = assess_substantiveness(outcome.directives, outcome.program, outcome.traces[0])
        record["substantive"] = report.verdict
        record["substantiveness"] = report.to_dict()
    if store is not None:
        store.write_artifact("solution.abm", outcome.source)
    _close(store, record)
    return record


def rate_solving(samples: Sequence[CorpusSample], backend_factory: BackendFactory,
                 config: RunConfig, runs_dir: Optional[Path] = None) -> Optional[Dict[str, Any]]:
    """Solving rate, substantiveness rate and failure causes over samples with an objective"""
    with_objective = [s for s in samples if s.objective is not None]
    if not with_objective:
        return None
    logger.info("Rating solving over %d sample(s)", len(with_objective))
    records = _map_samples(
        with_objective, lambda s: _solve_sample(s, backend_factory(s), config, _sample_store(runs_dir, s, "solving")),
        config.max_in_flight)
    total = len(records)
    causes = Counter(r["failure_cause"] for r in records if not r["success"])
    return {
        "sample_count": total,
        "budget": config.solving_budget,
        "solving_rate": _percent(sum(r["success"] for r in records), total),
        "substantiveness_rate": _percent(sum(r["substantive"] for r in records), total),
        "failure_causes": dict(sorted(causes.items())),
        "samples": records,
    }


def evaluate_corpus(corpus_dir: Union[str, Path], backend_factory: BackendFactory,
                    config: RunConfig, runs_dir: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Without `runs_dir` nothing is persisted"""
    samples = load_corpus(corpus_dir)
    runs_dir = Path(runs_dir) if runs_dir is not None else None
    report: Dict[str, Any] = {"modeling": rate_corpus(samples, backend_factory, config, runs_dir)}
    solving = rate_solving(samples, backend_factory, config, runs_dir)
    if solving is not None:
        report["solving"] = solving
    return report


def report_to_json(report: Dict[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
