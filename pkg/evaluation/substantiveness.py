"""
Substantiveness of an applied solution patch
File: evaluation/substantiveness.py
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Set, Tuple

from abm.nodes import AbmProgram
from abm.patch import Directive
from simulation.trace import SimulationTrace
from utils.logging_config import get_logger
from verification.slicing import backward_slice, collect_writers

logger = get_logger("substantiveness")

STRUCTURAL_OPS = {"add_state", "remove_state", "add_activity", "remove_activity"}


@dataclass
class SubstantivenessReport:
    added_states: List[str] = field(default_factory=list)
    removed_states: List[str] = field(default_factory=list)
    added_activities: List[str] = field(default_factory=list)
    removed_activities: List[str] = field(default_factory=list)
    modified_activities: List[str] = field(default_factory=list)
    parameter_changes: List[str] = field(default_factory=list)
    reachability: Dict[str, bool] = field(default_factory=dict)
    verdict: bool = False
    reason: str = ""

    @property
    def structural_changes(self) -> int:
        return (len(self.added_states) + len(self.removed_states)
                + len(self.added_activities) + len(self.removed_activities))

    def to_dict(self):
        return {
            "added_states": self.added_states,
            "removed_states": self.removed_states,
            "added_activities": self.added_activities,
            "removed_activities": self.removed_activities,
            "modified_activities": self.modified_activities,
            "parameter_changes": self.parameter_changes,
            "reachability": dict(sorted(self.reachability.items())),
            "verdict": self.verdict,
            "reason": self.reason,
        }


def _unique(items: Iterable[str]) -> List[str]:
    return list(dict.fromkeys(items))


def _sliced(program: AbmProgram) -> Tuple[Set[Tuple[str, str]], Set[Tuple[str, str]]]:
    """Activities and states in the backward slice of any recorded metric"""
    activities: Set[Tuple[str, str]] = set()
    states: Set[Tuple[str, str]] = set()
    for recorder in program.recorders:
        result = backward_slice(program, recorder.metric)
        activities |= result.activities
        states |= result.states
    return activities, states


def assess_substantiveness(directives: Iterable[Directive], program: AbmProgram,
                           trace: SimulationTrace) -> SubstantivenessReport:
    """
    An added activity is reachable when some schedule step runs it and it
    either executed at least once in `trace` or belongs to a metric's slice.
    An added state is reachable when it is in a metric's slice or an executed
    activity reads or writes it.
    """
    directives = list(directives)
    report = SubstantivenessReport(
        added_states=_unique(f"{d.object}.{d.name}" for d in directives if d.op == "add_state"),
        removed_states=_unique(f"{d.object}.{d.name}" for d in directives if d.op == "remove_state"),
        added_activities=_unique(f"{d.object}.{d.name}" for d in directives if d.op == "add_activity"),
        removed_activities=_unique(f"{d.object}.{d.name}" for d in directives if d.op == "remove_activity"),
        modified_activities=_unique(f"{d.object}.{d.name}" for d in directives if d.op == "replace_activity"),
        parameter_changes=_unique(d.name for d in directives if d.op == "set_parameter"),
    )

    if report.structural_changes == 0:
        report.reason = ("parameter-only patch" if report.parameter_changes
                         else "no state or activity added or removed")
        logger.info("Patch not substantive: %s", report.reason)
        return report

    scheduled = {(s.object_name, s.activity_name) for s in program.schedule}
    sliced_activities, sliced_states = _sliced(program)

    def ran(key: Tuple[str, str]) -> bool:
        return key in scheduled and trace.executed(*key) > 0

    touched: Set[Tuple[str, str]] = set()
    for writer in collect_writers(program):
        obj, act, _ = writer.key
        if ran((obj, act)):
            touched |= writer.reads.states
            if writer.writes_state is not None:
                touched.add(writer.writes_state)

    for name in report.added_activities:
        key = tuple(name.split(".", 1))
        report.reachability[name] = key in scheduled and (ran(key) or key in sliced_activities)
    for name in report.added_states:
        key = tuple(name.split(".", 1))
        report.reachability[name] = key in sliced_states or key in touched

    unreachable = sorted(k for k, ok in report.reachability.items() if not ok)
    report.verdict = not unreachable
    report.reason = (f"unreachable additions: {', '.join(unreachable)}" if unreachable
                     else "structural change with every addition reachable")
    logger.info("Substantiveness verdict %s (%s)", report.verdict, report.reason)
    return report
