"""
Export and reporting utilities for SAGE
File: utils/export_utils.py
"""

from typing import Any, Dict, List, Optional

import pandas as pd

from simulation.trace import SimulationTrace


def trace_frame(trace: SimulationTrace) -> pd.DataFrame:
    """Recorded metrics and event counts, one row per step"""
    columns: Dict[str, List] = {}
    for metric, values in sorted(trace.series.items()):
        columns[metric] = list(values)
    for event, counts in sorted(trace.events.items()):
        columns[f"event:{event}"] = list(counts)
    frame = pd.DataFrame(columns, index=pd.RangeIndex(1, trace.steps + 1, name="step"))
    return frame


def export_trace_to_csv(trace: SimulationTrace) -> str:
    """Export a trace's per-step table to CSV format"""
    if trace.steps == 0:
        return ""
    return trace_frame(trace).to_csv()


def render_trace(trace: SimulationTrace) -> str:
    report = f"SIMULATION TRACE (seed {trace.seed}, {trace.steps} steps)\n"
    report += "=" * 60 + "\n"
    if trace.steps == 0:
        return report + "(no steps)\n"
    report += trace_frame(trace).to_string() + "\n"

    if trace.activations:
        report += "\nACTIVATIONS\n"
        report += "-----------\n"
        for key, counts in sorted(trace.activations.items()):
            report += f"{key}: {sum(counts)} over {len(counts)} steps\n"
    return report


def modeling_frame(report: Dict[str, Any]) -> pd.DataFrame:
    rows = []
    for sample in report["samples"]:
        score = sample.get("codebleu") or {}
        rows.append({
            "sample": sample["name"],
            "success": sample["success"],
            "iterations": sample["iterations_used"],
            "first executable": sample["first_attempt"]["executable"],
            "first elaborate": sample["first_attempt"]["elaborate"],
            "executable": sample["executable"],
            "elaborate": sample["elaborate"],
            "codebleu": score.get("total"),
        })
    return pd.DataFrame(rows).set_index("sample")


def solving_frame(report: Dict[str, Any]) -> pd.DataFrame:
    rows = [{
        "sample": sample["name"],
        "success": sample["success"],
        "iterations": sample["iterations_used"],
        "cause": sample.get("failure_cause") or "",
        "substantive": sample["substantive"],
    } for sample in report["samples"]]
    return pd.DataFrame(rows).set_index("sample")


def render_corpus_report(report: Dict[str, Any]) -> str:
    """Text rendering of an evaluation report; no timestamps, so reruns compare equal"""
    modeling = report["modeling"]
    text = "CORPUS EVALUATION REPORT\n"
    text += "=" * 60 + "\n\n"

    text += "MODELING\n"
    text += "--------\n"
    text += f"Samples: {modeling['sample_count']} (budget {modeling['budget']})\n"
    text += f"Executable: {modeling['executable_rate']}% (first attempt {modeling['first_attempt_executable_rate']}%)\n"
    text += f"Elaborate: {modeling['elaborate_rate']}% (first attempt {modeling['first_attempt_elaborate_rate']}%)\n"
    score = modeling["codebleu"]
    text += (f"CodeBLEU: {score['total']} (ngram {score['ngram']}, weighted {score['weighted_ngram']}, "
             f"ast {score['ast_match']}, dataflow {score['dataflow_match']})\n\n")

    text += "Iterations used\n"
    for name, count in modeling["iteration_histogram"].items():
        text += f"  {name:>5}: {count}\n"
    text += "\n" + modeling_frame(modeling).to_string() + "\n"

    solving: Optional[Dict[str, Any]] = report.get("solving")
    if solving:
        text += "\nSOLVING\n"
        text += "-------\n"
        text += f"Samples: {solving['sample_count']} (budget {solving['budget']})\n"
        text += f"Solved: {solving['solving_rate']}%\n"
        text += f"Substantive: {solving['substantiveness_rate']}%\n"
        for cause, count in solving["failure_causes"].items():
            text += f"  {cause}: {count}\n"
        text += "\n" + solving_frame(solving).to_string() + "\n"
    return text
