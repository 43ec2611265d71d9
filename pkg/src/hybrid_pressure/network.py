"""Network topology: lanes, movements, four-approach intersections and grids.

Sides are named by compass letter. An incoming lane ``"S-"`` enters the
intersection through its south side (vehicles head north); an outgoing lane
``"N+"`` leaves through the north side.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping

import numpy as np

SIDES = ("N", "E", "S", "W")  # clockwise
TURNS = ("right", "through", "left")


class NetworkError(ValueError):
    """Raised for invalid physical parameters or malformed topology."""


class VehicleClass(str, Enum):
    AV = "AV"
    LV = "LV"


class LaneKind(str, Enum):
    SOURCE = "source"
    INTERNAL = "internal"
    SINK = "sink"


class MovementType(str, Enum):
    PRIORITY = "priority"
    YIELD = "yield"


def lane_capacity(u: float, w: float, K: float) -> float:
    """Capacity (veh/s) of a triangular fundamental diagram."""
    if u <= 0 or w <= 0:
        raise NetworkError(f"speeds must be positive, got u={u}, w={w}")
    if K < 0:
        raise NetworkError(f"jam density must be non-negative, got K={K}")
    return u * w * K / (u + w)


def movement_service_rate(c_in: float, c_out: float, dt: float, lost: float) -> float:
    """Unconditional movement service rate in vehicles per period."""
    if lost < 0 or lost >= dt:
        raise NetworkError(f"lost time must satisfy 0 <= L < dt, got L={lost}, dt={dt}")
    return min(c_in, c_out) * (dt - lost)


def opposite(side: str) -> str:
    return SIDES[(SIDES.index(side) + 2) % 4]


def exit_side(entry: str, turn: str) -> str:
    heading = SIDES.index(opposite(entry))
    offset = {"right": 1, "through": 0, "left": -1}[turn]
    return SIDES[(heading + offset) % 4]


def turn_of(entry: str, out: str) -> str:
    for turn in TURNS:
        if exit_side(entry, turn) == out:
            return turn
    raise NetworkError(f"no movement from {entry}- to {out}+")


def perpendicular(a: str, b: str) -> bool:
    return (SIDES.index(a) - SIDES.index(b)) % 2 == 1


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants shared by every lane of a network."""

    u: float = 44.0  # free-flow speed, ft/s
    w: float = 11.0  # wave speed, ft/s
    K: float = 1 / 17.6  # jam density, veh/ft
    vehicle_length: float = 17.6  # ft
    width: float = 48.0  # intersection box side, ft
    dt: float = 10.0  # period length, s
    lost_time_green: float = 2.0  # s
    lost_time_blue: float = 0.0  # s
    traversal_periods: int = 3
    min_speed: float = 4.4  # ft/s
    two_x_green: bool = False

    @property
    def capacity(self) -> float:
        return lane_capacity(self.u, self.w, self.K)


@dataclass(frozen=True)
class Lane:
    id: str
    cls: VehicleClass
    u: float
    w: float
    K: float
    capacity: float
    kind: LaneKind
    link: str
    downstream: str | None  # intersection id; None for sinks
    upstream: str | None = None  # intersection id; None for sources
    capacity_factor: float = 1.0

    @property
    def recomputed_capacity(self) -> float:
        return self.capacity_factor * lane_capacity(self.u, self.w, self.K)


@dataclass(frozen=True)
class Movement:
    src: str
    dst: str
    cls: VehicleClass
    turn: str
    mtype: MovementType
    sbar: float
    node: str
    entry: str  # side of the intersection the movement enters through
    out: str  # side it leaves through

    @property
    def key(self) -> tuple[str, str]:
        return (self.src, self.dst)


@dataclass
class IntersectionSpec:
    """One four-approach intersection.

    ``incoming[side][cls]`` and ``outgoing[side][cls]`` hold lane ids.
    ``conflicts`` maps every LV movement key to its conflict set; ``c`` and
    ``g`` are the conflict and forbidden-pair indicators indexed like
    ``lv_movements``.
    """

    id: str
    incoming: dict[str, dict[VehicleClass, str]]
    outgoing: dict[str, dict[VehicleClass, str]]
    lv_movements: list[Movement]
    av_movements: list[Movement]
    conflicts: dict[tuple[str, str], frozenset[tuple[str, str]]]
    c: np.ndarray
    g: np.ndarray

    def movement(self, src: str, dst: str) -> Movement:
        for m in self.lv_movements + self.av_movements:
            if m.src == src and m.dst == dst:
                return m
        raise KeyError((src, dst))

    def lanes_in(self, cls: VehicleClass) -> list[str]:
        return [self.incoming[s][cls] for s in SIDES if cls in self.incoming.get(s, {})]

    def label(self, lane_id: str) -> str:
        """Local name such as ``"S-"`` for a lane touching this intersection."""
        for table, sign in ((self.incoming, "-"), (self.outgoing, "+")):
            for side, by_cls in table.items():
                if lane_id in by_cls.values():
                    return f"{side}{sign}"
        raise KeyError(lane_id)


def _conflicts(entry: str, turn: str, other_entry: str, other_turn: str) -> bool:
    if entry == other_entry:
        return False
    out, other_out = exit_side(entry, turn), exit_side(other_entry, other_turn)
    same_out = out == other_out
    if turn == "right":
        return same_out and other_turn in ("through", "left")
    if turn == "through":
        if other_turn == "right":
            return same_out
        if other_turn == "through":
            return perpendicular(entry, other_entry)
        return True
    # left
    if other_turn == "right":
        return same_out
    if other_turn == "through":
        return True
    return perpendicular(entry, other_entry)


def build_four_approach_intersection(
    node: str,
    incoming: Mapping[str, Mapping[VehicleClass, str]],
    outgoing: Mapping[str, Mapping[VehicleClass, str]],
    lanes: Mapping[str, Lane],
    params: PhysicalParams = PhysicalParams(),
) -> IntersectionSpec:
    """Standard intersection: right/through priority, left yield.

    Every approach present in ``incoming`` gets one movement per turn towards
    each outgoing side that exists and carries a lane of the same class.
    """
    for table in (incoming, outgoing):
        for side, by_cls in table.items():
            if side not in SIDES:
                raise NetworkError(f"unknown approach {side!r} at {node}")
            for cls, lane_id in by_cls.items():
                if lane_id not in lanes:
                    raise NetworkError(f"lane {lane_id!r} at {node} is not declared")
                if lanes[lane_id].cls != cls:
                    raise NetworkError(f"lane {lane_id!r} has class {lanes[lane_id].cls}, expected {cls}")

    lv: list[Movement] = []
    av: list[Movement] = []
    for side in SIDES:
        for cls, lane_id in sorted(incoming.get(side, {}).items()):
            for turn in TURNS:
                out = exit_side(side, turn)
                dst = outgoing.get(out, {}).get(cls)
                if dst is None:
                    continue
                lost = params.lost_time_blue if cls is VehicleClass.AV else params.lost_time_green
                sbar = movement_service_rate(lanes[lane_id].capacity, lanes[dst].capacity, params.dt, lost)
                mtype = MovementType.YIELD if turn == "left" else MovementType.PRIORITY
                mv = Movement(lane_id, dst, cls, turn, mtype, sbar, node, side, out)
                (av if cls is VehicleClass.AV else lv).append(mv)

    conflicts: dict[tuple[str, str], frozenset[tuple[str, str]]] = {}
    for m in lv:
        conflicts[m.key] = frozenset(
            o.key for o in lv if _conflicts(m.entry, m.turn, o.entry, o.turn)
        )
    n = len(lv)
    c = np.zeros((n, n), dtype=int)
    g = np.zeros((n, n), dtype=int)
    for a, m in enumerate(lv):
        for b, o in enumerate(lv):
            if o.key in conflicts[m.key] or m.key in conflicts[o.key]:
                c[a, b] = 1
                if m.mtype == o.mtype:
                    g[a, b] = 1
    return IntersectionSpec(
        id=node,
        incoming={s: dict(v) for s, v in incoming.items()},
        outgoing={s: dict(v) for s, v in outgoing.items()},
        lv_movements=lv,
        av_movements=av,
        conflicts=conflicts,
        c=c,
        g=g,
    )


@dataclass
class Network:
    params: PhysicalParams
    lanes: dict[str, Lane]
    intersections: dict[str, IntersectionSpec]
    rows: int = 0
    cols: int = 0
    # lane id -> movements leaving it (at its downstream intersection)
    successors: dict[str, list[Movement]] = field(default_factory=dict)
    movements: dict[tuple[str, str], Movement] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.movements:
            for spec in self.intersections.values():
                for m in spec.lv_movements + spec.av_movements:
                    self.movements[m.key] = m
        if not self.successors:
            self.successors = {lane: [] for lane in self.lanes}
            for m in self.movements.values():
                self.successors[m.src].append(m)

    @property
    def source_lanes(self) -> list[str]:
        return [i for i, l in self.lanes.items() if l.kind is LaneKind.SOURCE]

    @property
    def internal_lanes(self) -> list[str]:
        return [i for i, l in self.lanes.items() if l.kind is LaneKind.INTERNAL]

    @property
    def sink_lanes(self) -> list[str]:
        return [i for i, l in self.lanes.items() if l.kind is LaneKind.SINK]

    def lane_rate(self, lane_id: str) -> float:
        """Unconditional lane service rate: sum of its movements' rates."""
        return sum(m.sbar for m in self.successors[lane_id])

    def access_points(self) -> list[tuple[str, str]]:
        """Boundary (node, side) pairs that carry a source and a sink link."""
        out = []
        for node, spec in self.intersections.items():
            for side in SIDES:
                lanes = spec.incoming.get(side, {})
                if lanes and self.lanes[next(iter(lanes.values()))].kind is LaneKind.SOURCE:
                    out.append((node, side))
        return out

    def iter_movements(self, cls: VehicleClass | None = None) -> Iterator[Movement]:
        for m in self.movements.values():
            if cls is None or m.cls == cls:
                yield m


_STEP = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}


def node_id(r: int, c: int) -> str:
    return f"r{r}c{c}"


def parse_node(node: str) -> tuple[int, int]:
    r, c = node[1:].split("c")
    return int(r), int(c)


def build_grid(rows: int, cols: int, params: PhysicalParams = PhysicalParams()) -> Network:
    """Grid of four-approach intersections, row 0 on the north edge.

    Every link carries one LV and one AV lane, or a single double-capacity LV
    lane when ``params.two_x_green`` is set.
    """
    if rows < 1 or cols < 1:
        raise NetworkError(f"grid dimensions must be >= 1, got {rows}x{cols}")
    classes = (VehicleClass.LV,) if params.two_x_green else (VehicleClass.LV, VehicleClass.AV)
    factor = 2.0 if params.two_x_green else 1.0
    cap = factor * params.capacity

    lanes: dict[str, Lane] = {}
    incoming: dict[str, dict[str, dict[VehicleClass, str]]] = {}
    outgoing: dict[str, dict[str, dict[VehicleClass, str]]] = {}

    def add_link(link: str, kind: LaneKind, up: str | None, down: str | None) -> dict[VehicleClass, str]:
        ids = {}
        for cls in classes:
            lane_id = f"{link}/{cls.value}"
            lanes[lane_id] = Lane(
                lane_id, cls, params.u, params.w, params.K, cap, kind, link, down, up, factor
            )
            ids[cls] = lane_id
        return ids

    for r in range(rows):
        for c in range(cols):
            n = node_id(r, c)
            incoming.setdefault(n, {})
            outgoing.setdefault(n, {})
            for side in SIDES:
                dr, dc = _STEP[side]
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    m = node_id(rr, cc)
                    # link n -> m leaves n through `side` and enters m through the opposite side
                    ids = add_link(f"{n}>{m}", LaneKind.INTERNAL, n, m)
                    outgoing[n][side] = ids
                    incoming.setdefault(m, {})[opposite(side)] = ids
                else:
                    incoming[n][side] = add_link(f"src:{n}:{side}", LaneKind.SOURCE, None, n)
                    outgoing[n][side] = add_link(f"snk:{n}:{side}", LaneKind.SINK, n, None)

    intersections = {
        n: build_four_approach_intersection(n, incoming[n], outgoing[n], lanes, params)
        for n in sorted(incoming, key=parse_node)
    }
    return Network(params, lanes, intersections, rows, cols)


def conflict_matrix_csv(spec: IntersectionSpec) -> str:
    """CSV dump of the conflict and forbidden indicators of one intersection."""
    names = [f"{spec.label(m.src)}>{spec.label(m.dst)}" for m in spec.lv_movements]
    rows = ["movement_a,movement_b,type_a,type_b,c,g"]
    for a, m in enumerate(spec.lv_movements):
        for b, o in enumerate(spec.lv_movements):
            rows.append(f"{names[a]},{names[b]},{m.mtype.value},{o.mtype.value},{spec.c[a, b]},{spec.g[a, b]}")
    return "\n".join(rows) + "\n"
