from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

Key = tuple[str, str]


class ExtractionError(RuntimeError):
    """Raised when a phase outcome is requested from a non-optimal solve."""


@dataclass
class PhaseOutcome:
    """Result of one phase model at one intersection for one period."""

    node: str
    color: str  # "green" | "blue"
    objective: float
    a: dict[Key, float] = field(default_factory=dict)
    b: dict[Key, int] = field(default_factory=dict)
    y: dict[Key, float] = field(default_factory=dict)
    lane_rates: dict[str, float] = field(default_factory=dict)
    phi: dict[str, float] = field(default_factory=dict)
    schedules: list[Any] = field(default_factory=list)
    served: dict[str, list[Any]] = field(default_factory=dict)
    service: dict[Key, float] = field(default_factory=dict)  # fractions realised in simulation
    solve_time: float = 0.0
    nodes: int = 0

    def weighted_lane_rates(self, weights: dict[str, float]) -> dict[str, float]:
        return {lane: weights.get(lane, 0.0) * y for lane, y in self.lane_rates.items()}
