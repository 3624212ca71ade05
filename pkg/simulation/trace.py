"""
Simulation traces
File: simulation/trace.py
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union


@dataclass
class SimulationTrace:
    seed: int
    steps: int
    series: Dict[str, List[Union[int, float]]] = field(default_factory=dict)
    events: Dict[str, List[int]] = field(default_factory=dict)
    activations: Dict[str, List[int]] = field(default_factory=dict)
    final_state: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "steps": self.steps,
            "series": self.series,
            "events": self.events,
            "activations": self.activations,
            "final_state": self.final_state,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimulationTrace":
        return cls(
            seed=data["seed"],
            steps=data["steps"],
            series={k: list(v) for k, v in data.get("series", {}).items()},
            events={k: list(v) for k, v in data.get("events", {}).items()},
            activations={k: list(v) for k, v in data.get("activations", {}).items()},
            final_state=data.get("final_state", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "SimulationTrace":
        return cls.from_dict(json.loads(text))

    def save(self, path: Union[str, Path]):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SimulationTrace":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def executed(self, object_name: str, activity_name: str) -> int:
        """Total instance activations of an activity over the run"""
        return sum(self.activations.get(f"{object_name}.{activity_name}", []))

    def summary(self) -> Dict[str, Any]:
        """Compact per-metric overview used in CoT prompts"""
        overview: Dict[str, Any] = {}
        for metric, values in sorted(self.series.items()):
            if values:
                overview[metric] = {
                    "first": values[0],
                    "final": values[-1],
                    "min": min(values),
                    "max": max(values),
                }
            else:
                overview[metric] = {}
        return overview


def snapshot_metrics(trace: SimulationTrace) -> Dict[str, List[Union[int, float]]]:
    return {metric: list(values) for metric, values in trace.series.items()}
