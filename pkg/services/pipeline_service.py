"""
Modeling and solving pipelines for SAGE
File: services/pipeline_service.py

run_modeling: generate a program from a conceptual representation, then
verify and rectify until verifier-level1 finds nothing or the budget runs out.

run_solving: simulate the given program as baseline, compile the objective's
criteria, then loop CoT -> Modify -> inner repair -> simulate -> evaluate
until every criterion holds or the budget runs out.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from abm.defects import Defect
from abm.nodes import AbmProgram
from abm.parser import parse_program
from abm.patch import Directive, apply_patch
from abm.printer import print_program
from config.settings import PIPELINE_CONFIG, SIMULATION_CONFIG
from errors import (
    GeneratorError, InnerRepairExhausted, PatchError, PreconditionError, RuntimeFault,
)
from representation.documents import ConceptualRepresentation, ObjectiveRepresentation, render_conceptual, render_objective
from services.generator_service import BaseBackend, Generator, PromptKind, Solution, render_prompt
from simulation.engine import simulate
from simulation.trace import SimulationTrace
from utils.logging_config import get_logger
from verification.criteria import CriterionPredicate, Verdict, compile_criteria, evaluate_seeds, metrics_of
from verification.level1 import build_rectification_prompt, check_program
from verification.slicing import backward_slice

logger = get_logger("pipeline")


def _call(generator: Generator, prompt, stage: str, iteration: int):
    """Generate, attaching the iteration to any generator failure"""
    try:
        return generator.generate(prompt).payload
    except GeneratorError as exc:
        exc.iteration = iteration
        exc.add_note(f"during {stage} iteration {iteration} ({prompt.kind.value} prompt)")
        raise


def _program_or_none(source: str) -> Optional[AbmProgram]:
    parsed = parse_program(source)
    return None if isinstance(parsed, list) else parsed


# Modeling

@dataclass
class ModelingRound:
    iteration: int  # 0 is the initial generation
    source: str
    defects: List[Defect]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iteration": self.iteration,
            "defect_count": len(self.defects),
            "defects": [d.to_dict() for d in self.defects],
        }


@dataclass
class ModelingOutcome:
    source: str
    program: Optional[AbmProgram]
    history: List[ModelingRound]
    iterations_used: int
    success: bool
    budget: int

    @property
    def defects(self) -> List[Defect]:
        """Defects of the returned (best-so-far) program"""
        return next(r.defects for r in self.history if r.source == self.source)

    @property
    def first_attempt(self) -> ModelingRound:
        return self.history[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": "modeling",
            "success": self.success,
            "budget": self.budget,
            "iterations_used": self.iterations_used,
            "final_defects": [d.to_dict() for d in self.defects],
            "history": [r.to_dict() for r in self.history],
        }


def _best_modeling_round(history: Sequence[ModelingRound]) -> ModelingRound:
    """Fewest defects, earliest on ties"""
    return min(history, key=lambda r: (len(r.defects), r.iteration))


def run_modeling(rep: ConceptualRepresentation, backend: BaseBackend,
                 budget: int = PIPELINE_CONFIG["modeling_budget"], store=None) -> ModelingOutcome:
    if budget < 1:
        raise PreconditionError(f"modeling budget must be >= 1, got {budget}")
    generator = Generator(backend, store)

    prompt = render_prompt(PromptKind.GEN_ABM, {"scenario": render_conceptual(rep).rstrip("\n")})
    source = _call(generator, prompt, "modeling", 0)
    defects = check_program(source, rep)
    history = [ModelingRound(0, source, defects)]
    _log_modeling_round(store, history[-1])

    remaining = budget
    while defects and remaining > 0:
        iteration = budget - remaining + 1
        prompt = build_rectification_prompt(source, defects)
        source = _call(generator, prompt, "modeling", iteration)
        defects = check_program(source, rep)
        remaining -= 1
        history.append(ModelingRound(iteration, source, defects))
        _log_modeling_round(store, history[-1])

    success = not defects
    final = history[-1] if success else _best_modeling_round(history)
    outcome = ModelingOutcome(
        source=final.source,
        program=_program_or_none(final.source),
        history=history,
        iterations_used=budget - remaining,
        success=success,
        budget=budget,
    )
    logger.info("Modeling %s after %d repair round(s); %d defect(s) left",
                "succeeded" if success else "exhausted its budget",
                outcome.iterations_used, len(final.defects))
    return outcome


def _log_modeling_round(store, record: ModelingRound):
    logger.info("Modeling iteration %d: %d defect(s)", record.iteration, len(record.defects))
    if store is not None:
        store.record_round("modeling", record.iteration, record.to_dict())


# Solving

@dataclass
class SolvingRound:
    iteration: int  # 0 is the baseline
    verdict: Verdict
    source: str
    solutions: List[Solution] = field(default_factory=list)
    directives: List[Directive] = field(default_factory=list)
    repair_rounds: int = 0
    cause: Optional[str] = None  # execution / criteria_unmet when the round failed

    def to_dict(self) -> Dict[str, Any]:
        record = {
            "iteration": self.iteration,
            "verdict": self.verdict.to_dict(),
            "solutions": [s.title for s in self.solutions],
            "directives": [d.describe() for d in self.directives],
            "repair_rounds": self.repair_rounds,
        }
        if self.cause:
            record["cause"] = self.cause
        return record


@dataclass
class SolvingOutcome:
    source: str
    program: AbmProgram
    solutions: List[Solution]
    history: List[SolvingRound]
    predicates: List[CriterionPredicate]
    baseline: List[SimulationTrace]
    iterations_used: int
    success: bool
    budget: int
    seeds: Tuple[int, ...]
    steps: int
    traces: List[SimulationTrace] = field(default_factory=list)
    failure_cause: Optional[str] = None
    chosen_round: int = -1  # index into history of the returned program

    @property
    def verdict(self) -> Verdict:
        """Verdict of the returned program"""
        return self.history[self.chosen_round].verdict

    @property
    def directives(self) -> List[Directive]:
        """Every directive applied on the way from the original program to `program`"""
        applied = self.history[1:self.chosen_round + 1]
        return [d for r in applied if r.cause != "execution" for d in r.directives]

    def to_dict(self) -> Dict[str, Any]:
        record = {
            "stage": "solving",
            "success": self.success,
            "budget": self.budget,
            "iterations_used": self.iterations_used,
            "seeds": list(self.seeds),
            "steps": self.steps,
            "predicates": [{"variable_name": p.criterion.variable_name, "predicate": p.text}
                           for p in self.predicates],
            "solutions": [s.model_dump(exclude_none=True) for s in self.solutions],
            "verdict": self.verdict.to_dict(),
            "history": [r.to_dict() for r in self.history],
        }
        if self.failure_cause:
            record["failure_cause"] = self.failure_cause
        return record


def _slices_text(program: AbmProgram, preds: Sequence[CriterionPredicate]) -> str:
    metrics: List[str] = []
    for pred in preds:
        for metric in metrics_of(pred.expr):
            if metric not in metrics:
                metrics.append(metric)
    return "\n".join(json.dumps(backward_slice(program, m).to_dict(), sort_keys=True) for m in metrics)


def _summary_text(traces: Sequence[SimulationTrace]) -> str:
    trace = traces[0]
    return json.dumps({"seed": trace.seed, "steps": trace.steps, "metrics": trace.summary()},
                      sort_keys=True, indent=2)


def _inner_repair(generator: Generator, source: str, budget: int, iteration: int,
                  store=None) -> Tuple[str, List[Defect], int]:
    """Verifier-level1 loop on a patched program; returns (source, defects, rounds)"""
    defects = check_program(source)
    remaining = budget
    while defects and remaining > 0:
        prompt = build_rectification_prompt(source, defects)
        source = _call(generator, prompt, "inner repair of solving", iteration)
        defects = check_program(source)
        remaining -= 1
        logger.info("Inner repair round %d of solving iteration %d: %d defect(s)",
                    budget - remaining, iteration, len(defects))
        if store is not None:
            store.record_round("inner", iteration, {"round": budget - remaining, "defect_count": len(defects)})
    return source, defects, budget - remaining


def run_solving(objective: ObjectiveRepresentation, program: Union[AbmProgram, str], backend: BaseBackend,
                budget: int = PIPELINE_CONFIG["solving_budget"],
                seed: int = SIMULATION_CONFIG["seed"],
                steps: int = SIMULATION_CONFIG["steps"],
                inner_budget: int = PIPELINE_CONFIG["inner_budget"],
                seeds: Optional[Sequence[int]] = None,
                store=None) -> SolvingOutcome:
    if budget < 1:
        raise PreconditionError(f"solving budget must be >= 1, got {budget}")
    source = print_program(program) if isinstance(program, AbmProgram) else program
    initial_defects = check_program(source)
    if initial_defects:
        raise PreconditionError(f"the program to solve on has {len(initial_defects)} defect(s); "
                                f"first: {initial_defects[0].reason}")
    current = parse_program(source)
    seed_list = tuple(seeds) if seeds else (seed,)
    generator = Generator(backend, store)

    # computed once, never after a patch
    baseline = [simulate(current, s, steps) for s in seed_list]
    try:
        preds = compile_criteria(objective, generator, current)
    except GeneratorError as exc:
        exc.iteration = 0
        exc.add_note("while compiling the objective's criteria")
        raise
    verdict = evaluate_seeds(preds, baseline, baseline)
    history = [SolvingRound(0, verdict, source)]
    _log_solving_round(store, history[-1])

    accepted: List[Solution] = []
    best = (history[0], [])
    traces = baseline
    best_traces = baseline
    remaining = budget

    def outcome(success: bool, cause: Optional[str]) -> SolvingOutcome:
        chosen, chosen_solutions = (history[-1], accepted) if success else best
        return SolvingOutcome(
            source=chosen.source,
            program=parse_program(chosen.source),
            solutions=list(chosen_solutions),
            history=history,
            predicates=preds,
            baseline=baseline,
            iterations_used=budget - remaining,
            success=success,
            budget=budget,
            seeds=seed_list,
            steps=steps,
            traces=traces if success else best_traces,
            failure_cause=cause,
            chosen_round=next(i for i, r in enumerate(history) if r is chosen),
        )

    while not verdict.satisfying_flag and remaining > 0:
        iteration = budget - remaining + 1
        remaining -= 1

        cot_prompt = render_prompt(PromptKind.COT, {
            "objective": render_objective(objective).rstrip("\n"),
            "program": source.rstrip("\n"),
            "simulation_summary": _summary_text(traces),
            "slices": _slices_text(current, preds),
            "verdict": json.dumps(verdict.to_dict(), sort_keys=True),
        })
        cot = _call(generator, cot_prompt, "solving", iteration)
        logger.info("Solving iteration %d: CoT proposed %s", iteration,
                    ", ".join(repr(s.title) for s in cot.solutions))

        modify_prompt = render_prompt(PromptKind.MODIFY, {
            "program": source.rstrip("\n"),
            "solutions": json.dumps([s.model_dump(exclude_none=True) for s in cot.solutions], indent=2),
        })
        modification = _call(generator, modify_prompt, "solving", iteration)
        directives = list(modification.directives)

        try:
            patched = apply_patch(current, directives)
        except PatchError as exc:
            verdict = Verdict.failed(preds, f"patch rejected: {exc}")
            history.append(SolvingRound(iteration, verdict, source, list(cot.solutions), directives,
                                        cause="execution"))
            _log_solving_round(store, history[-1])
            continue
        _cross_check(modification.program, patched, iteration)

        candidate_source, defects, rounds = _inner_repair(generator, patched, inner_budget, iteration, store)
        if defects:
            verdict = Verdict.failed(preds, f"inner repair left {len(defects)} defect(s)")
            history.append(SolvingRound(iteration, verdict, candidate_source, list(cot.solutions),
                                        directives, rounds, cause="execution"))
            _log_solving_round(store, history[-1])
            partial = outcome(False, "execution")
            raise InnerRepairExhausted(
                f"solving iteration {iteration}: inner repair could not remove "
                f"{len(defects)} defect(s) within {inner_budget} round(s)", partial)

        candidate = parse_program(candidate_source)
        try:
            candidate_traces = [simulate(candidate, s, steps) for s in seed_list]
        except RuntimeFault as fault:
            verdict = Verdict.failed(preds, f"runtime fault: {fault}")
            history.append(SolvingRound(iteration, verdict, candidate_source, list(cot.solutions),
                                        directives, rounds, cause="execution"))
            _log_solving_round(store, history[-1])
            continue

        verdict = evaluate_seeds(preds, candidate_traces, baseline)
        source, current, traces = candidate_source, candidate, candidate_traces
        accepted.extend(cot.solutions)
        history.append(SolvingRound(iteration, verdict, source, list(cot.solutions), directives, rounds,
                                    cause=None if verdict.satisfying_flag else "criteria_unmet"))
        _log_solving_round(store, history[-1])
        if verdict.satisfied_count > best[0].verdict.satisfied_count:
            best = (history[-1], list(accepted))
            best_traces = candidate_traces

    if verdict.satisfying_flag:
        logger.info("Solving succeeded after %d iteration(s)", budget - remaining)
        return outcome(True, None)
    cause = history[-1].cause or "criteria_unmet"
    logger.info("Solving exhausted its budget of %d; last failure cause: %s", budget, cause)
    return outcome(False, cause)


def _cross_check(program_text: Optional[str], patched: str, iteration: int):
    """The patch is the contract; a disagreeing full program is only reported"""
    if program_text is None:
        return
    parsed = _program_or_none(program_text)
    if parsed is None or print_program(parsed) != patched:
        logger.warning("Solving iteration %d: the generator's full program differs from the applied patch; "
                       "using the patch", iteration)


def _log_solving_round(store, record: SolvingRound):
    logger.info("Solving iteration %d: %d/%d criteria satisfied",
                record.iteration, record.verdict.satisfied_count, len(record.verdict.per_criterion))
    if store is not None:
        store.record_round("solving", record.iteration, record.to_dict())
