"""Vehicles, routes and turning proportions."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..network import (
    Network,
    NetworkError,
    VehicleClass,
    node_id,
    parse_node,
)
from ..outcome import Key

FALLBACK_SHARES = {"right": 0.1, "through": 0.8, "left": 0.1}

AccessPoint = tuple[str, str]  # (boundary node, side)


@dataclass
class Vehicle:
    id: int
    cls: VehicleClass  # drawn class, kept for reporting even in 2xGreen runs
    route: list[str]  # lane ids from source to sink
    departure: float  # s
    origin: AccessPoint
    destination: AccessPoint
    pos: int = 0
    queue_times: list[float] = field(default_factory=list)  # when it joined each lane queue
    exit: float | None = None

    @property
    def lane(self) -> str:
        return self.route[self.pos]

    @property
    def next_lane(self) -> str:
        return self.route[self.pos + 1]

    @property
    def travel_time(self) -> float | None:
        return None if self.exit is None else self.exit - self.departure


def node_path(network: Network, origin: str, dest: str) -> list[str]:
    """Manhattan shortest path; ties go to the lexicographically smallest (row, col)."""
    r, c = parse_node(origin)
    tr, tc = parse_node(dest)
    path = [origin]
    while (r, c) != (tr, tc):
        options = []
        if r != tr:
            options.append((r + (1 if tr > r else -1), c))
        if c != tc:
            options.append((r, c + (1 if tc > c else -1)))
        r, c = min(options)
        path.append(node_id(r, c))
    return path


def _side_towards(a: str, b: str) -> str:
    (ra, ca), (rb, cb) = parse_node(a), parse_node(b)
    if rb < ra:
        return "N"
    if rb > ra:
        return "S"
    return "E" if cb > ca else "W"


def build_route(network: Network, origin: AccessPoint, dest: AccessPoint, cls: VehicleClass) -> list[str]:
    if origin == dest:
        raise NetworkError("origin and destination must differ")
    nodes = node_path(network, origin[0], dest[0])
    specs = network.intersections
    lanes = [specs[origin[0]].incoming[origin[1]][cls]]
    for a, b in zip(nodes, nodes[1:]):
        lanes.append(specs[a].outgoing[_side_towards(a, b)][cls])
    lanes.append(specs[dest[0]].outgoing[dest[1]][cls])
    return lanes


def lane_class(network: Network, cls: VehicleClass) -> VehicleClass:
    return VehicleClass.LV if network.params.two_x_green else cls


def turning_proportions(network: Network, routes: list[list[str]] | Counter) -> dict[Key, float]:
    """Empirical p from a route set (or a Counter of weighted transitions).

    Lanes no route uses fall back to the default turn shares so proportions out
    of every non-sink lane still sum to one.
    """
    if isinstance(routes, Counter):
        moves = routes
    else:
        moves = Counter()
        for route in routes:
            moves.update(zip(route, route[1:]))
    totals: Counter = Counter()
    for (i, _), n in moves.items():
        totals[i] += n
    p: dict[Key, float] = {}
    for lane, succ in network.successors.items():
        if not succ:
            continue
        if totals[lane] > 0:
            for mv in succ:
                p[mv.key] = moves.get(mv.key, 0) / totals[lane]
        else:
            norm = sum(FALLBACK_SHARES[mv.turn] for mv in succ)
            for mv in succ:
                p[mv.key] = FALLBACK_SHARES[mv.turn] / norm
    return p


def generate_demand(
    network: Network,
    rate_vph: float,
    horizon: float,
    av_share: float,
    seed: int,
) -> tuple[list[Vehicle], dict[Key, float]]:
    """Fixed vehicle list: uniform boundary OD pairs and uniform departures over the horizon."""
    if rate_vph < 0 or horizon < 0:
        raise ValueError("departure rate and horizon must be non-negative")
    if not 0.0 <= av_share <= 1.0:
        raise ValueError(f"AV share must be in [0, 1], got {av_share}")
    points = network.access_points()
    if len(points) < 2:
        raise NetworkError("need at least two boundary access points")
    rng = np.random.default_rng(seed)
    n = int(round(rate_vph * horizon / 3600.0))
    origins = rng.integers(0, len(points), n)
    offsets = rng.integers(1, len(points), n)  # destination differs from the origin
    departures = rng.uniform(0.0, horizon, n) if horizon > 0 else np.zeros(n)
    is_av = rng.random(n) < av_share
    order = np.argsort(departures, kind="stable")
    vehicles = []
    for new_id, k in enumerate(order):
        o = points[origins[k]]
        d = points[(origins[k] + offsets[k]) % len(points)]
        cls = VehicleClass.AV if is_av[k] else VehicleClass.LV
        route = build_route(network, o, d, lane_class(network, cls))
        vehicles.append(Vehicle(new_id, cls, route, float(departures[k]), o, d))
    return vehicles, turning_proportions(network, [v.route for v in vehicles])


@dataclass
class PoissonDemand:
    """Per-period Poisson arrivals at each access point, uniform destinations."""

    network: Network
    rate: float  # mean arrivals per access point per period
    av_share: float
    seed: int

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError("arrival rate must be non-negative")
        self.points = self.network.access_points()
        self.rng = np.random.default_rng(self.seed)
        self._routes: dict = {}
        self.next_id = 0

    def route(self, o: AccessPoint, d: AccessPoint, cls: VehicleClass) -> list[str]:
        key = (o, d, cls)
        if key not in self._routes:
            self._routes[key] = build_route(self.network, o, d, cls)
        return self._routes[key]

    def expected_transitions(self) -> Counter:
        """Mean transition counts per period, the exact expectation of the arrival process."""
        moves: Counter = Counter()
        m = len(self.points)
        shares = ((VehicleClass.AV, self.av_share), (VehicleClass.LV, 1.0 - self.av_share))
        for o in self.points:
            for d in self.points:
                if d == o:
                    continue
                for cls, share in shares:
                    cls = lane_class(self.network, cls)
                    weight = self.rate * share / (m - 1)
                    if weight <= 0:
                        continue
                    route = self.route(o, d, cls)
                    for step in zip(route, route[1:]):
                        moves[step] += weight
        return moves

    def source_rates(self) -> dict[str, float]:
        """Mean arrivals per period on every source lane."""
        d: dict[str, float] = {}
        for node, side in self.points:
            for cls, share in ((VehicleClass.AV, self.av_share), (VehicleClass.LV, 1.0 - self.av_share)):
                lane = self.network.intersections[node].incoming[side][lane_class(self.network, cls)]
                d[lane] = d.get(lane, 0.0) + self.rate * share
        return d

    def arrivals(self, t: float) -> list[Vehicle]:
        """Vehicles joining their source queues at the start of the period at ``t``."""
        out = []
        m = len(self.points)
        for k, o in enumerate(self.points):
            n = int(self.rng.poisson(self.rate))
            for _ in range(n):
                d = self.points[(k + int(self.rng.integers(1, m))) % m]
                cls = VehicleClass.AV if self.rng.random() < self.av_share else VehicleClass.LV
                out.append(Vehicle(self.next_id, cls, self.route(o, d, lane_class(self.network, cls)), t, o, d))
                self.next_id += 1
        return out
