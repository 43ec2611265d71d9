"""Pressure weights and the per-period phase decision at every intersection."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Protocol, Sequence

from .blue import (
    BlueVehicle,
    Geometry,
    ScheduleRecord,
    build_blue_model,
    build_conflict_geometry,
    extract_blue_outcome,
)
from .green import build_green_model, extract_green_outcome, saturate_green_service
from .milp import ResourceLimitError, solve
from .network import IntersectionSpec, LaneKind, Network, VehicleClass
from .outcome import Key, PhaseOutcome

TIE_TOL = 1e-9


class PolicyMode(str, Enum):
    HYBRID = "hybrid"
    PURE_GREEN = "pure-green"
    PURE_BLUE = "pure-blue"
    TWO_X_GREEN = "2xgreen"


class SolveLimitError(RuntimeError):
    def __init__(self, node: str, color: str, cause: ResourceLimitError):
        super().__init__(f"{color} model at {node}: {cause}")
        self.node = node
        self.color = color
        self.cause = cause


class QueueView(Protocol):
    """What the controller needs to see of the network state."""

    def queue_length(self, lane: str) -> int: ...

    def blue_queue(self, lane: str) -> Sequence[BlueVehicle]: ...


def pressure_weights(queues: Mapping[str, float], p: Mapping[Key, float], network: Network) -> dict[str, float]:
    """w_i = x_i - sum_j p_ij x_j over the movements out of every non-sink lane."""
    w = {}
    for lane_id, lane in network.lanes.items():
        if lane.kind is LaneKind.SINK:
            continue
        x = float(queues.get(lane_id, 0))
        for mv in network.successors[lane_id]:
            if network.lanes[mv.dst].kind is not LaneKind.SINK:
                x -= p.get(mv.key, 0.0) * float(queues.get(mv.dst, 0))
        w[lane_id] = x
    return w


@dataclass
class SolveStat:
    period: int
    node: str
    color: str
    seconds: float
    nodes: int
    n_vars: int


@dataclass
class StepResult:
    selected: dict[str, PhaseOutcome]
    green: dict[str, PhaseOutcome]
    blue: dict[str, PhaseOutcome]
    service: dict[Key, float]  # network-wide service matrix a(t), active movements only
    stats: list[SolveStat] = field(default_factory=list)


def _empty(node: str, color: str) -> PhaseOutcome:
    return PhaseOutcome(node, color, 0.0)


class Controller:
    """Runs both phase models per intersection and keeps the higher pressure.

    Identical inputs at an intersection give identical models, so optimal
    outcomes are memoised per intersection. Only real solves are reported in
    the step statistics.
    """

    def __init__(self, network: Network, p: Mapping[Key, float], mode: PolicyMode = PolicyMode.HYBRID,
                 backend: str = "highs", cache: bool = True):
        self.network = network
        self.p = dict(p)
        self.mode = PolicyMode(mode)
        if self.mode is PolicyMode.TWO_X_GREEN and not network.params.two_x_green:
            raise ValueError("2xGreen mode needs a network built with two_x_green=True")
        self.backend = backend
        self.cache = cache
        self._green_cache: dict = {}
        self._blue_cache: dict = {}
        self.geometry: dict[str, Geometry] = {}
        if self.mode in (PolicyMode.HYBRID, PolicyMode.PURE_BLUE):
            for node, spec in network.intersections.items():
                self.geometry[node] = build_conflict_geometry(spec, network.params.width)
        self.sbar = {mv.key: mv.sbar for mv in network.iter_movements()}

    @property
    def uses_green(self) -> bool:
        return self.mode is not PolicyMode.PURE_BLUE

    @property
    def uses_blue(self) -> bool:
        return self.mode in (PolicyMode.HYBRID, PolicyMode.PURE_BLUE)

    def green_phase(self, spec: IntersectionSpec, queues: Mapping[str, float], weights: Mapping[str, float],
                    period: int, stats: list[SolveStat]) -> PhaseOutcome:
        lanes = spec.lanes_in(VehicleClass.LV)
        if not any(weights.get(l, 0.0) > 0 and queues.get(l, 0) > 0 for l in lanes):
            return _empty(spec.id, "green")
        key = tuple((queues[l], weights[l]) for l in lanes)
        if self.cache and (spec.id, key) in self._green_cache:
            return self._green_cache[(spec.id, key)]
        model, vm = build_green_model(spec, queues, weights, self.p)
        try:
            sol = solve(model, self.backend)
        except ResourceLimitError as exc:
            raise SolveLimitError(spec.id, "green", exc) from exc
        stats.append(SolveStat(period, spec.id, "green", sol.solve_time, sol.nodes, model.n_vars))
        out = extract_green_outcome(sol, vm)
        out.service = saturate_green_service(out, spec, vm)
        if self.cache:
            self._green_cache[(spec.id, key)] = out
        return out

    def blue_phase(self, spec: IntersectionSpec, view: QueueView, weights: Mapping[str, float], t: float,
                   period: int, stats: list[SolveStat]) -> PhaseOutcome:
        params = self.network.params
        lanes = spec.lanes_in(VehicleClass.AV)
        queues = {}
        for lane in lanes:
            if weights.get(lane, 0.0) > 0:
                # queued vehicles are already present, so only the period start binds
                queues[lane] = [replace(v, entry_time=0.0) for v in list(view.blue_queue(lane))[:10]]
        if not any(queues.values()):
            return _empty(spec.id, "blue")
        key = tuple((l, weights[l], tuple(v.dst for v in queues[l])) for l in lanes if l in queues)
        cached = self._blue_cache.get((spec.id, key)) if self.cache else None
        if cached is None:
            model, vm = build_blue_model(spec, queues, weights, 0.0, params.dt, params, self.geometry[spec.id])
            try:
                sol = solve(model, self.backend)
            except ResourceLimitError as exc:
                raise SolveLimitError(spec.id, "blue", exc) from exc
            if model.n_vars:
                stats.append(SolveStat(period, spec.id, "blue", sol.solve_time, sol.nodes, model.n_vars))
            cached = extract_blue_outcome(sol, vm, {mv.key: mv.sbar for mv in spec.av_movements})
            cached.service = dict(cached.a)
            if self.cache:
                self._blue_cache[(spec.id, key)] = cached
        return _shift_blue(cached, queues, view, t)

    def step(self, view: QueueView, weights: Mapping[str, float], t: float, period: int = 0) -> StepResult:
        stats: list[SolveStat] = []
        result = StepResult({}, {}, {}, {}, stats)
        queues = {lane: view.queue_length(lane) for lane in weights}
        for node, spec in self.network.intersections.items():
            green = self.green_phase(spec, queues, weights, period, stats) if self.uses_green else None
            blue = self.blue_phase(spec, view, weights, t, period, stats) if self.uses_blue else None
            if green is not None:
                result.green[node] = green
            if blue is not None:
                result.blue[node] = blue
            chosen = select_phase(green, blue)
            result.selected[node] = chosen
            for k, a in chosen.service.items():
                if a > 0:
                    result.service[k] = a
        return result


def select_phase(green: PhaseOutcome | None, blue: PhaseOutcome | None) -> PhaseOutcome:
    """Higher pressure wins; a tie goes to green."""
    if blue is None:
        return green
    if green is None:
        return blue
    if blue.objective > green.objective + TIE_TOL * max(1.0, abs(green.objective)):
        return blue
    return green


def _shift_blue(outcome: PhaseOutcome, queues: Mapping[str, list[BlueVehicle]], view: QueueView, t: float) -> PhaseOutcome:
    """Map a schedule solved on period-relative time and stand-in vehicles onto the real ones."""
    ids = {}
    entry = {}
    for lane, queue in queues.items():
        real = list(view.blue_queue(lane))
        for k, v in enumerate(queue):
            ids[(lane, k)] = real[k].id
            entry[(lane, k)] = real[k].entry_time
    out = replace(outcome, schedules=[], served={}, a=dict(outcome.a), b=dict(outcome.b), y=dict(outcome.y),
                  lane_rates=dict(outcome.lane_rates), service=dict(outcome.service))
    for rec in outcome.schedules:
        out.schedules.append(
            replace(rec, vehicle=ids[(rec.lane, rec.order)], entry_time=entry[(rec.lane, rec.order)],
                    points=[(c, a + t, d) for c, a, d in rec.points])
        )
    for lane, served in outcome.served.items():
        out.served[lane] = [ids[(lane, k)] for k in range(len(served))]
    return out


def phases_csv_rows(period: int, result: StepResult, network: Network) -> list[list[str]]:
    rows = []
    for node, out in result.selected.items():
        parts = [f"{src}>{dst}={a:.6f}" for (src, dst), a in sorted(out.service.items()) if a > 0]
        rows.append([str(period), node, out.color, f"{out.objective:.6f}", ";".join(parts)])
    return rows

