"""Period-by-period network simulation under the phase controller."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..blue import BlueVehicle, verify_blue_schedule
from ..network import LaneKind, Network, VehicleClass
from ..outcome import Key
from ..policy import Controller, PolicyMode, StepResult, pressure_weights
from .demand import PoissonDemand, Vehicle
from .metrics import MetricsLog

CREDIT_EPS = 1e-9


class SimulationError(RuntimeError):
    pass


class NetworkState:
    """FIFO queues per lane, vehicles in transit and movement service credit."""

    def __init__(self, network: Network):
        self.network = network
        self.queues: dict[str, deque[Vehicle]] = {
            lane: deque() for lane, l in network.lanes.items() if l.kind is not LaneKind.SINK
        }
        self.transit: dict[int, list[tuple[str, Vehicle]]] = {}  # period -> arrivals in service order
        self.credit: dict[Key, float] = {}
        self.exited: list[Vehicle] = []
        self.entered = 0

    def queue_length(self, lane: str) -> int:
        return len(self.queues[lane])

    def queue_lengths(self) -> dict[str, int]:
        return {lane: len(q) for lane, q in self.queues.items()}

    def blue_queue(self, lane: str) -> list[BlueVehicle]:
        return [BlueVehicle(v.id, v.next_lane, v.queue_times[-1]) for v in self.queues[lane]]

    def movement_counts(self, lane: str) -> dict[str, int]:
        """Per-movement queue counts x_ij; they sum to x_i by construction."""
        counts: dict[str, int] = {}
        for v in self.queues[lane]:
            counts[v.next_lane] = counts.get(v.next_lane, 0) + 1
        return counts

    @property
    def in_transit(self) -> int:
        return sum(len(batch) for batch in self.transit.values())

    @property
    def queued(self) -> int:
        return sum(len(q) for q in self.queues.values())

    def join(self, vehicle: Vehicle, t: float) -> None:
        vehicle.queue_times.append(t)
        self.queues[vehicle.lane].append(vehicle)

    def inject(self, vehicles: Iterable[Vehicle], t: float) -> None:
        for v in vehicles:
            self.entered += 1
            self.join(v, t)

    def deliver(self, period: int, t: float) -> None:
        for _, v in self.transit.pop(period, []):
            self.join(v, t)


def _move(state: NetworkState, v: Vehicle, period: int, t: float, dt: float) -> None:
    v.pos += 1
    if state.network.lanes[v.lane].kind is LaneKind.SINK:
        v.exit = t + dt
        state.exited.append(v)
    else:
        due = period + state.network.params.traversal_periods
        state.transit.setdefault(due, []).append((v.lane, v))


def apply_service(state: NetworkState, step: StepResult, period: int, t: float) -> list[Vehicle]:
    """Realise one period of service; returns the vehicles that left their queues."""
    network = state.network
    dt = network.params.dt
    moved: list[Vehicle] = []
    active = {k for k, a in step.service.items() if a > 0}
    for k in [k for k in state.credit if k not in active]:
        del state.credit[k]  # deactivated movements lose their credit
    for node, outcome in step.selected.items():
        spec = network.intersections[node]
        if outcome.color == "blue":
            for lane, served in outcome.served.items():
                queue = state.queues[lane]
                for vid in served:
                    if not queue or queue[0].id != vid:
                        raise SimulationError(f"blue schedule at {node} serves vehicle {vid}, not the head of {lane}")
                    v = queue.popleft()
                    _move(state, v, period, t, dt)
                    moved.append(v)
            continue
        for side in sorted(spec.incoming):
            lane = spec.incoming[side].get(VehicleClass.LV)
            if lane is None:
                continue
            for mv in network.successors[lane]:
                a = step.service.get(mv.key, 0.0)
                if a > 0:
                    state.credit[mv.key] = state.credit.get(mv.key, 0.0) + a * mv.sbar
            queue = state.queues[lane]
            while queue:
                key = (lane, queue[0].next_lane)
                if state.credit.get(key, 0.0) < 1.0 - CREDIT_EPS:
                    break  # the head blocks everyone behind it
                state.credit[key] -= 1.0
                v = queue.popleft()
                _move(state, v, period, t, dt)
                moved.append(v)
            for mv in network.successors[lane]:
                if mv.key in state.credit:
                    c = state.credit[mv.key]
                    state.credit[mv.key] = c - math.floor(c + CREDIT_EPS) if c >= 1.0 - CREDIT_EPS else c
    return moved


@dataclass
class SimulationResult:
    log: MetricsLog
    vehicles: list[Vehicle]
    completed: bool
    periods: int


def run_simulation(
    network: Network,
    p: Mapping[Key, float],
    vehicles: Sequence[Vehicle] | None = None,
    mode: PolicyMode | str = PolicyMode.HYBRID,
    backend: str = "highs",
    max_periods: int = 2000,
    poisson: PoissonDemand | None = None,
    verify_blue: bool = True,
    record_queues: bool = True,
) -> SimulationResult:
    """Run the controller until every vehicle has left, or ``max_periods`` elapse.

    With ``poisson`` set, arrivals are drawn every period for exactly
    ``max_periods`` periods instead of taken from ``vehicles``.
    """
    mode = PolicyMode(mode)
    if mode is PolicyMode.TWO_X_GREEN and not network.params.two_x_green:
        raise ValueError("2xGreen mode needs a network built with two_x_green=True")
    controller = Controller(network, p, mode, backend)
    dt = network.params.dt
    state = NetworkState(network)
    log = MetricsLog()
    pending = deque(sorted(vehicles or [], key=lambda v: (v.departure, v.id)))
    spawned: list[Vehicle] = list(pending)
    total = len(pending)
    period = 0
    while period < max_periods:
        t = period * dt
        if poisson is not None:
            batch = poisson.arrivals(t)
            spawned.extend(batch)
            total += len(batch)
            state.inject(batch, t)
        else:
            if len(state.exited) == total:
                break
            batch = []
            while pending and pending[0].departure <= t + 1e-9:
                batch.append(pending.popleft())
            state.inject(batch, t)
        state.deliver(period, t)
        queues = state.queue_lengths()
        weights = pressure_weights(queues, p, network)
        step = controller.step(state, weights, t, period)
        if verify_blue:
            for node, out in step.selected.items():
                if out.color == "blue":
                    served = [r for r in out.schedules if r.served]
                    report = verify_blue_schedule(served, controller.geometry[node], t, dt, network.params.w)
                    if not report.ok:
                        raise SimulationError(f"blue schedule at {node}, period {period}: {report.violations[0].detail}")
        apply_service(state, step, period, t)
        log.record_period(period, queues if record_queues else None, state.queued, step, network)
        period += 1
        if state.queued + state.in_transit + len(state.exited) != state.entered:
            raise SimulationError(f"vehicle conservation broken at period {period}")
    completed = poisson is None and len(state.exited) == total
    log.finish(spawned, completed)
    return SimulationResult(log, spawned, completed, period)
