"""Run metrics and their CSV forms."""
from __future__ import annotations

import csv
import io
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..network import Network, VehicleClass
from ..policy import SolveStat, StepResult, phases_csv_rows


@dataclass
class MetricsLog:
    queue_rows: list[tuple[int, str, int]] = field(default_factory=list)
    total_queue: list[int] = field(default_factory=list)  # after service, per period
    phase_rows: list[list[str]] = field(default_factory=list)
    history: dict[str, list[str]] = field(default_factory=dict)  # intersection -> colour per period
    solves: list[SolveStat] = field(default_factory=list)
    vehicle_rows: list[tuple] = field(default_factory=list)
    tstt: float = 0.0
    mean_tt: dict[str, float] = field(default_factory=dict)
    exited: int = 0
    unfinished: int = 0
    completed: bool = True

    def record_period(self, period: int, queues: Mapping[str, int] | None, queued: int, step: StepResult,
                      network: Network) -> None:
        if queues is not None:
            for lane in sorted(queues):
                self.queue_rows.append((period, lane, queues[lane]))
        self.total_queue.append(queued)
        self.phase_rows.extend(phases_csv_rows(period, step, network))
        for node, out in step.selected.items():
            self.history.setdefault(node, []).append(out.color)
        self.solves.extend(step.stats)

    def finish(self, vehicles: Sequence, completed: bool) -> None:
        self.completed = completed
        by_cls: dict[str, list[float]] = {c.value: [] for c in VehicleClass}
        for v in sorted(vehicles, key=lambda v: v.id):
            tt = v.travel_time
            self.vehicle_rows.append((v.id, v.cls.value, v.departure, v.exit, tt))
            if tt is None:
                self.unfinished += 1
            else:
                self.exited += 1
                self.tstt += tt
                by_cls[v.cls.value].append(tt)
        self.mean_tt = {c: (statistics.fmean(x) if x else 0.0) for c, x in by_cls.items()}
        all_tt = [t for x in by_cls.values() for t in x]
        self.mean_tt["all"] = statistics.fmean(all_tt) if all_tt else 0.0

    def vehicles_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "class", "departure", "exit", "travel_time"])
        for vid, cls, dep, ex, tt in self.vehicle_rows:
            w.writerow([vid, cls, f"{dep:.6f}", "" if ex is None else f"{ex:.6f}", "" if tt is None else f"{tt:.6f}"])
        return buf.getvalue()

    def queues_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "lane", "length"])
        w.writerows(self.queue_rows)
        return buf.getvalue()

    def phases_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "intersection", "color", "objective", "a"])
        w.writerows(self.phase_rows)
        return buf.getvalue()


def phase_streaks(history: Mapping[str, Sequence[str]]) -> dict[str, Counter]:
    """Histogram of maximal same-colour runs, pooled over intersections."""
    out = {"green": Counter(), "blue": Counter()}
    for colours in history.values():
        run, prev = 0, None
        for c in colours:
            if c == prev:
                run += 1
            else:
                if prev is not None:
                    out.setdefault(prev, Counter())[run] += 1
                run, prev = 1, c
        if prev is not None:
            out.setdefault(prev, Counter())[run] += 1
    return out


def mean_streak(hist: Counter) -> float:
    n = sum(hist.values())
    return sum(k * c for k, c in hist.items()) / n if n else 0.0
