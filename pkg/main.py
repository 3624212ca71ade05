"""
SAGE
Main entry point for the command-line interface

Exit codes: 0 success; 1 pipeline failure (budget exhausted, criteria unmet,
defects found, inner repair exhausted, runtime fault); 2 usage, config,
document or generator errors.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# tomllib and BaseException.add_note
MIN_PYTHON = (3, 11)
if sys.version_info < MIN_PYTHON:
    sys.exit(f"SAGE needs Python {MIN_PYTHON[0]}.{MIN_PYTHON[1]} or newer")

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.append(str(project_root))

from abm.parser import parse_program
from config.settings import RunConfig, load_run_config
from database.run_store import RunStore
from errors import (
    ConfigError, DocumentError, GeneratorError, InnerRepairExhausted, InvalidWeights, PreconditionError,
    PredicateParseError, RuntimeFault, SageError, UnknownMetric, UnknownMetricError,
)
from evaluation.corpus import evaluate_corpus, report_to_json
from representation.documents import load_conceptual, load_objective
from services.generator_service import Generator, MockBackend, create_backend
from services.pipeline_service import run_modeling, run_solving
from simulation.engine import simulate
from utils.export_utils import render_corpus_report, render_trace
from utils.logging_config import get_logger, setup_logging
from verification.criteria import CriterionPredicate, compile_criteria, evaluate_seeds, parse_predicate
from verification.level1 import check_program
from verification.slicing import backward_slice

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

logger = get_logger("cli")

PRECEDENCE_NOTE = (
    "Settings resolve as: command-line flag > SAGE_* environment variable > "
    "config file (--config, else ./sage.toml) > built-in default. "
    "SAGE_API_KEY (or a .env file) supplies the remote backend's key."
)


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(text: str, out: Optional[str] = None):
    """Structured output goes to --out when given, else stdout"""
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _load_program(path: str):
    """Parse a program file; defects make this a failed precondition"""
    parsed = parse_program(_read_text(path))
    if isinstance(parsed, list):
        raise PreconditionError(f"{path} has {len(parsed)} defect(s); first: {parsed[0].reason}")
    return parsed


def _open_store(config: RunConfig, command: str) -> RunStore:
    store = RunStore(config.runs_dir, command=command)
    store.start_logging()
    logger.info("Run directory: %s", store.path)
    return store


# Subcommands

def _modeling_summary(outcome, store: RunStore) -> Dict[str, Any]:
    return {
        "success": outcome.success,
        "iterations_used": outcome.iterations_used,
        "defect_count": len(outcome.defects),
        "run_dir": str(store.path),
    }


def cmd_model(args, config: RunConfig) -> int:
    rep = load_conceptual(args.scenario)
    store = _open_store(config, "model")
    try:
        outcome = run_modeling(rep, create_backend(config), config.modeling_budget, store=store)
        store.write_artifact("model.abm", outcome.source)
        store.write_outcome({**outcome.to_dict(), "run_id": store.run_id, "config": config.to_dict()})
    finally:
        store.stop_logging()
    if args.out:
        # the program goes to --out, the summary to stdout
        _emit(outcome.source, args.out)
        _emit(json.dumps(_modeling_summary(outcome, store), indent=2, sort_keys=True) + "\n")
    else:
        _emit(outcome.source)
    if not outcome.success:
        logger.error("Modeling left %d defect(s) after %d repair round(s)",
                     len(outcome.defects), outcome.iterations_used)
        return EXIT_FAILURE
    return EXIT_OK


def _solving_summary(outcome, store: RunStore) -> Dict[str, Any]:
    return {
        "success": outcome.success,
        "iterations_used": outcome.iterations_used,
        "failure_cause": outcome.failure_cause,
        "solutions": [s.title for s in outcome.solutions],
        "verdict": outcome.verdict.to_dict(),
        "run_dir": str(store.path),
    }


def cmd_solve(args, config: RunConfig) -> int:
    objective = load_objective(args.objective)
    source = _read_text(args.program)
    store = _open_store(config, "solve")
    try:
        try:
            outcome = run_solving(objective, source, create_backend(config),
                                  budget=config.solving_budget, seed=config.seed, steps=config.steps,
                                  inner_budget=config.inner_budget, seeds=config.seed_list, store=store)
        except InnerRepairExhausted as exc:
            store.write_artifact("solution.abm", exc.outcome.source)
            store.write_outcome({**exc.outcome.to_dict(), "run_id": store.run_id, "error": str(exc)})
            raise
        store.write_artifact("solution.abm", outcome.source)
        store.write_outcome({**outcome.to_dict(), "run_id": store.run_id, "config": config.to_dict()})
    finally:
        store.stop_logging()

    if args.out:
        _emit(outcome.source, args.out)
    _emit(json.dumps(_solving_summary(outcome, store), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if outcome.success else EXIT_FAILURE


def cmd_simulate(args, config: RunConfig) -> int:
    program = _load_program(args.program)
    trace = simulate(program, config.seed, config.steps)
    text = render_trace(trace) if args.format == "table" else trace.to_json()
    _emit(text, args.trace_out)
    return EXIT_OK


def cmd_verify(args, config: RunConfig) -> int:
    rep = load_conceptual(args.scenario) if args.scenario else None
    defects = check_program(_read_text(args.program), rep)
    if not defects:
        _emit("[]\n", args.out)
        return EXIT_OK
    _emit("".join(json.dumps(d.to_dict(), sort_keys=True) + "\n" for d in defects), args.out)
    return EXIT_FAILURE


def _load_predicates(path: str, objective) -> List[CriterionPredicate]:
    """Predicates given as a {variable_name: predicate} JSON object"""
    texts = json.loads(_read_text(path))
    if not isinstance(texts, dict):
        raise ConfigError("predicates", f"{path} must hold a JSON object, got {type(texts).__name__}")
    compiled = []
    for criterion in objective.criteria:
        if criterion.variable_name not in texts:
            raise ConfigError("predicates", f"no predicate for criterion {criterion.variable_name}")
        if not isinstance(texts[criterion.variable_name], str):
            raise ConfigError("predicates", f"predicate for {criterion.variable_name} must be a string")
        compiled.append(CriterionPredicate(criterion, parse_predicate(texts[criterion.variable_name])))
    return compiled


def cmd_verify_solution(args, config: RunConfig) -> int:
    objective = load_objective(args.objective)
    candidate = _load_program(args.program)
    baseline = _load_program(args.baseline)
    store = _open_store(config, "verify-solution")
    try:
        if args.predicates:
            preds = _load_predicates(args.predicates, objective)
        else:
            preds = compile_criteria(objective, Generator(create_backend(config), store), baseline)
        seeds = config.seed_list
        verdict = evaluate_seeds(preds,
                                 [simulate(candidate, s, config.steps) for s in seeds],
                                 [simulate(baseline, s, config.steps) for s in seeds])
        store.write_outcome({**verdict.to_dict(), "success": verdict.satisfying_flag,
                             "run_id": store.run_id, "config": config.to_dict()})
    finally:
        store.stop_logging()
    _emit(json.dumps(verdict.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK if verdict.satisfying_flag else EXIT_FAILURE


def cmd_slice(args, config: RunConfig) -> int:
    program = _load_program(args.program)
    result = backward_slice(program, args.metric)
    _emit(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_eval(args, config: RunConfig) -> int:
    if config.backend == "mock":
        def backend_factory(sample):
            return MockBackend(sample.fixtures_dir)
    else:
        def backend_factory(sample):
            return create_backend(config)

    store = _open_store(config, "eval")
    try:
        report = evaluate_corpus(args.corpus, backend_factory, config, runs_dir=store.path)
        store.write_artifact("report.json", report_to_json(report))
        store.write_outcome({"success": True, "run_id": store.run_id, "config": config.to_dict()})
    finally:
        store.stop_logging()
    text = render_corpus_report(report) if args.format == "text" else report_to_json(report)
    _emit(text, args.out)
    return EXIT_OK


# Argument parsing

def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("settings")
    group.add_argument("--config", help="TOML config file (default: ./sage.toml if present)")
    group.add_argument("--backend", dest="backend", choices=["mock", "remote"])
    group.add_argument("--endpoint", help="chat-completions URL of the remote backend")
    group.add_argument("--llm-model", dest="model", help="model name sent to the remote backend")
    group.add_argument("--timeout", dest="timeout_s", type=float, help="per-request timeout in seconds")
    group.add_argument("--max-retries", type=int)
    group.add_argument("--max-in-flight", type=int, help="concurrent backend requests")
    group.add_argument("--fixtures-dir", help="mock backend fixture directory")
    group.add_argument("--runs-dir", help="parent directory of run artifact directories")
    group.add_argument("--seed", type=int)
    group.add_argument("--steps", type=int)
    group.add_argument("--seeds", type=int, help="evaluate candidates on this many consecutive seeds")
    group.add_argument("--weights", help="CodeBLEU weights: ngram,weighted,ast,dataflow")
    group.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="sage",
        description="Model agent-based simulations and solve problems on them with a text generator.",
        epilog=PRECEDENCE_NOTE,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("model", parents=[common], epilog=PRECEDENCE_NOTE,
                              help="generate a verified program from a scenario")
    p.add_argument("--scenario", required=True, help="conceptual representation (JSON)")
    p.add_argument("--budget", dest="modeling_budget", type=int, help="repair rounds")
    p.add_argument("--out", help="write the program here instead of stdout")
    p.set_defaults(handler=cmd_model)

    p = subparsers.add_parser("solve", parents=[common], epilog=PRECEDENCE_NOTE,
                              help="search for a solution to an objective on a program")
    p.add_argument("--objective", required=True, help="objective representation (JSON)")
    p.add_argument("--model", dest="program", required=True, help=".abm program to solve on")
    p.add_argument("--budget", dest="solving_budget", type=int, help="solving iterations")
    p.add_argument("--inner-budget", type=int, help="repair rounds per patched candidate")
    p.add_argument("--out", help="write the solved program here")
    p.set_defaults(handler=cmd_solve)

    p = subparsers.add_parser("simulate", parents=[common], epilog=PRECEDENCE_NOTE,
                              help="run a program and print its trace")
    p.add_argument("program")
    p.add_argument("--trace-out", help="write the trace here instead of stdout")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(handler=cmd_simulate)

    p = subparsers.add_parser("verify", parents=[common], epilog=PRECEDENCE_NOTE,
                              help="list verifier-level1 defects, one JSON object per line")
    p.add_argument("program")
    p.add_argument("--scenario", help="conceptual representation to check activities against")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_verify)

    p = subparsers.add_parser("verify-solution", parents=[common], epilog=PRECEDENCE_NOTE,
                              help="judge a candidate program against an objective")
    p.add_argument("objective")
    p.add_argument("program", help="candidate program")
    p.add_argument("--baseline", required=True, help="original program for unchanged(...) criteria")
    p.add_argument("--predicates", help="JSON object of precompiled predicates by variable name")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_verify_solution)

    p = subparsers.add_parser("slice", parents=[common], epilog=PRECEDENCE_NOTE,
                              help="backward slice of a recorded metric")
    p.add_argument("program")
    p.add_argument("metric")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_slice)

    p = subparsers.add_parser("eval", parents=[common], epilog=PRECEDENCE_NOTE,
                              help="evaluate modeling and solving over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_eval)
    return parser


SETTING_FLAGS = (
    "backend", "endpoint", "model", "timeout_s", "max_retries", "max_in_flight", "fixtures_dir",
    "runs_dir", "seed", "steps", "seeds", "weights", "log_level",
    "modeling_budget", "solving_budget", "inner_budget",
)


def _flags(args) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in SETTING_FLAGS if getattr(args, key, None) is not None}


def main(argv: Optional[List[str]] = None) -> int:
    """Application entry point; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    setup_logging()
    try:
        config = load_run_config(_flags(args), args.config)
        setup_logging(config.log_level)
        return args.handler(args, config)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_USAGE
    except InnerRepairExhausted as exc:
        logger.error("Solving stopped: %s", exc)
        return EXIT_FAILURE
    except RuntimeFault as exc:
        logger.error("Simulation fault: %s", exc)
        return EXIT_FAILURE
    except PreconditionError as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE
    except GeneratorError as exc:
        where = f" (iteration {exc.iteration})" if exc.iteration is not None else ""
        logger.error("Generator error%s: %s", where, exc)
        return EXIT_USAGE
    except (DocumentError, PredicateParseError, UnknownMetric, UnknownMetricError, InvalidWeights) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_USAGE
    except SageError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        logger.error("Input error: %s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
