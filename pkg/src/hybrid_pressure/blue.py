"""Blue-phase model: conflict-point reservations for autonomous vehicles.

Trajectories are straight chords across a square box. Each approach has four
lanes of width ``width / 4``; AV lanes are the two inner ones (incoming on the
right of the centre line, outgoing on the left). Conflict points are the
pairwise chord intersections, plus every chord's entry and exit points.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .milp import MilpModel, MilpSolution
from .network import SIDES, IntersectionSpec, PhysicalParams, VehicleClass
from .outcome import ExtractionError, Key, PhaseOutcome

TOL = 1e-6
MAX_POOL_PER_LANE = 10


class GeometryError(ValueError):
    pass


class BlueInputError(ValueError):
    pass


@dataclass(frozen=True)
class PathTemplate:
    """Ordered conflict points of one AV movement."""

    key: Key
    turn: str
    points: tuple[int, ...]
    dist: tuple[float, ...]  # cumulative distance from the entry point, ft

    @property
    def length(self) -> float:
        return self.dist[-1]

    @property
    def entry(self) -> int:
        return self.points[0]

    @property
    def exit(self) -> int:
        return self.points[-1]


@dataclass
class Geometry:
    width: float
    points: list[tuple[float, float]]
    paths: dict[Key, PathTemplate]

    def shared(self, a: Key, b: Key) -> list[int]:
        pb = set(self.paths[b].points)
        return [c for c in self.paths[a].points if c in pb]


def _rotate(side: str, dx: float, dy: float) -> tuple[float, float]:
    # maps the south-approach frame onto `side`
    if side == "S":
        return dx, dy
    if side == "W":
        return dy, -dx
    if side == "N":
        return -dx, -dy
    return -dy, dx  # E


def _side_point(side: str, width: float, offset: float) -> tuple[float, float]:
    h = width / 2.0
    dx, dy = _rotate(side, offset, -h)
    return h + dx, h + dy


def _segment_intersection(p1, p2, q1, q2) -> tuple[float, float] | None:
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    denom = rx * sy - ry * sx
    qpx, qpy = q1[0] - p1[0], q1[1] - p1[1]
    if abs(denom) < 1e-12:
        if abs(qpx * ry - qpy * rx) < 1e-9:
            raise GeometryError("collinear trajectories are not supported")
        return None
    t = (qpx * sy - qpy * sx) / denom
    u = (qpx * ry - qpy * rx) / denom
    if -1e-9 <= t <= 1 + 1e-9 and -1e-9 <= u <= 1 + 1e-9:
        return p1[0] + t * rx, p1[1] + t * ry
    return None


def build_conflict_geometry(spec: IntersectionSpec, width: float = 48.0) -> Geometry:
    if width <= 0:
        raise GeometryError(f"width must be positive, got {width}")
    lane_w = width / 4.0
    chords: dict[Key, tuple[tuple[float, float], tuple[float, float], str]] = {}
    for mv in spec.av_movements:
        if mv.entry not in SIDES or mv.out not in SIDES:
            raise GeometryError(f"unsupported approach in {mv.key}")
        start = _side_point(mv.entry, width, lane_w / 2.0)
        end = _side_point(mv.out, width, -lane_w / 2.0)
        chords[mv.key] = (start, end, mv.turn)

    coords: list[tuple[float, float]] = []
    ids: dict[tuple[float, float], int] = {}

    def pid(pt: tuple[float, float]) -> int:
        k = (round(pt[0], 6) + 0.0, round(pt[1], 6) + 0.0)
        if k not in ids:
            ids[k] = len(coords)
            coords.append(k)
        return ids[k]

    on_path: dict[Key, set[int]] = {k: {pid(s), pid(e)} for k, (s, e, _) in chords.items()}
    keys = list(chords)
    for n, a in enumerate(keys):
        for b in keys[n + 1 :]:
            sa, ea, _ = chords[a]
            sb, eb, _ = chords[b]
            if sa == sb:
                continue  # same lane: only the shared entry point
            hit = _segment_intersection(sa, ea, sb, eb)
            if hit is not None:
                c = pid(hit)
                on_path[a].add(c)
                on_path[b].add(c)

    paths = {}
    for k, (s, _, turn) in chords.items():
        ordered = sorted(on_path[k], key=lambda c: math.dist(s, coords[c]))
        dist = tuple(math.dist(s, coords[c]) for c in ordered)
        if any(d2 <= d1 for d1, d2 in zip(dist, dist[1:])):
            raise GeometryError(f"degenerate conflict points on {k}")
        paths[k] = PathTemplate(k, turn, tuple(ordered), dist)
    return Geometry(width, coords, paths)


@dataclass(frozen=True)
class BlueVehicle:
    """An AV queued on an incoming AV lane."""

    id: int | str
    dst: str  # outgoing AV lane
    entry_time: float  # time it joined the queue, s
    length: float | None = None


@dataclass
class ScheduleRecord:
    vehicle: int | str
    lane: str
    key: Key
    order: int  # position in its lane queue
    served: bool
    entry_time: float
    length: float
    min_speed: float
    max_speed: float
    points: list[tuple[int, float, float]]  # (point id, arrival, reservation duration)

    @property
    def travel_time(self) -> float:
        return self.points[-1][1] - self.points[0][1]

    def speed(self, geometry: Geometry) -> float:
        return geometry.paths[self.key].length / self.travel_time


@dataclass
class BlueVarMap:
    node: str
    t0: float
    dt: float
    pool: dict[str, list[BlueVehicle]]
    weights: dict[str, float]
    geometry: Geometry
    lengths: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)  # vehicle id -> var
    t: dict = field(default_factory=dict)  # (vehicle id, point) -> var
    tau: dict = field(default_factory=dict)  # (vehicle id, point) -> var
    delta: dict = field(default_factory=dict)  # (v, v', point) -> var, meaning v passes first
    horizon: float = 0.0
    big_m: float = 0.0
    min_speed: float = 0.0
    max_speed: float = 0.0
    wave_speed: float = 0.0


def _pool(
    spec: IntersectionSpec,
    av_queues: Mapping[str, Sequence[BlueVehicle]],
    weights: Mapping[str, float],
    geometry: Geometry,
    params: PhysicalParams,
    t: float,
    dt: float,
    max_per_lane: int,
) -> dict[str, list[BlueVehicle]]:
    """Vehicles that could still finish within the period.

    The shared entry point forces successive vehicles of a lane at least one
    free-flow reservation apart; anyone whose best-case completion misses the
    period end cannot be served, and neither can those queued behind them.
    Lanes with non-positive weight never add to the objective and are left out.
    """
    pool = {}
    for lane in spec.lanes_in(VehicleClass.AV):
        queue = list(av_queues.get(lane, []))[:max_per_lane]
        if weights.get(lane, 0.0) <= 0.0 or not queue:
            continue
        kept = []
        earliest = t
        for v in queue:
            key = (lane, v.dst)
            if key not in geometry.paths:
                break  # no movement for it this way (a U-turn); it blocks the lane
            length = v.length if v.length is not None else params.vehicle_length
            d = geometry.paths[key].length
            tau_min = length / params.w + length / params.u
            start = max(earliest, v.entry_time, t)
            if start + d / params.u + tau_min > t + dt + TOL:
                break
            kept.append(v)
            earliest = start + tau_min
        if kept:
            pool[lane] = kept
    return pool


def build_blue_model(
    spec: IntersectionSpec,
    av_queues: Mapping[str, Sequence[BlueVehicle]],
    weights: Mapping[str, float],
    t: float,
    dt: float,
    params: PhysicalParams = PhysicalParams(),
    geometry: Geometry | None = None,
    max_per_lane: int = MAX_POOL_PER_LANE,
    compact: bool = True,
) -> tuple[MilpModel, BlueVarMap]:
    """Assemble the conflict-point MILP for the AVs queued at one intersection.

    With ``compact`` the optimum is the same but the model is much easier to
    solve: separation between two served vehicles uses a period-sized big-M,
    served vehicles pass shared points before unserved ones, and every
    conflict point gets a capacity cut. Separation among unserved vehicles is
    dropped; :func:`extract_blue_outcome` defers them past the period anyway.
    """
    geometry = geometry or build_conflict_geometry(spec, params.width)
    outgoing = {spec.outgoing[s][VehicleClass.AV] for s in spec.outgoing if VehicleClass.AV in spec.outgoing[s]}
    for lane, queue in av_queues.items():
        if lane not in spec.lanes_in(VehicleClass.AV):
            raise BlueInputError(f"{lane} is not an incoming AV lane of {spec.id}")
        for v in queue:
            if v.dst not in outgoing:
                raise BlueInputError(f"vehicle {v.id} on {lane} heads to {v.dst}, not an outgoing AV lane of {spec.id}")
    pool = _pool(spec, av_queues, weights, geometry, params, t, dt, max_per_lane)
    u_max, u_min, w = params.u, params.min_speed, params.w
    vm = BlueVarMap(spec.id, t, dt, pool, {l: float(weights.get(l, 0.0)) for l in pool}, geometry,
                    min_speed=u_min, max_speed=u_max, wave_speed=w)
    model = MilpModel(name=f"blue[{spec.id}]")
    vehicles = [(lane, k, v) for lane, queue in pool.items() for k, v in enumerate(queue)]
    if not vehicles:
        return model, vm

    d_max = max(geometry.paths[(lane, v.dst)].length for lane, _, v in vehicles)
    l_max = max(v.length or params.vehicle_length for _, _, v in vehicles)
    tau_max = l_max / w + l_max / u_min
    # unserved vehicles can always cross one at a time at free flow after the
    # period ends, so this horizon never cuts off an optimal solution
    horizon = dt + len(vehicles) * (l_max / w + l_max / u_max + d_max / u_max)
    big_m = horizon + tau_max
    vm.horizon, vm.big_m = horizon, big_m

    # earliest entry offsets implied by the entry-point headway of each lane
    earliest: dict = {}
    for lane, queue in pool.items():
        start = 0.0
        for v in queue:
            length = v.length if v.length is not None else params.vehicle_length
            start = max(start, v.entry_time - t)
            earliest[v.id] = start if compact else 0.0
            start += length / w + length / u_max

    for lane, k, v in vehicles:
        path = geometry.paths[(lane, v.dst)]
        length = v.length if v.length is not None else params.vehicle_length
        vm.lengths[v.id] = length
        vm.z[v.id] = model.add_var(f"z[{v.id}]", 0.0, 1.0, integer=True)
        for c, dc in zip(path.points, path.dist):
            lo = t + earliest[v.id] + (dc / u_max if compact else 0.0)
            vm.t[(v.id, c)] = model.add_var(f"t[{v.id},{c}]", lo, t + horizon)
            vm.tau[(v.id, c)] = model.add_var(f"tau[{v.id},{c}]", 0.0, tau_max)

    for lane, k, v in vehicles:
        path = geometry.paths[(lane, v.dst)]
        length, d = vm.lengths[v.id], path.length
        t_in, t_out = vm.t[(v.id, path.entry)], vm.t[(v.id, path.exit)]
        z = vm.z[v.id]
        model.add_constraint({t_out: 1.0, vm.tau[(v.id, path.exit)]: 1.0, z: big_m}, "<=", t + dt + big_m, f"window[{v.id}]")
        model.add_constraint({t_in: 1.0}, ">=", v.entry_time, f"entry[{v.id}]")
        for c in path.points:
            model.add_constraint({vm.tau[(v.id, c)]: 1.0, t_out: -length / d, t_in: length / d}, "=", length / w, f"tau[{v.id},{c}]")
        model.add_constraint({t_out: 1.0, t_in: -1.0}, ">=", d / u_max, f"vmax[{v.id}]")
        model.add_constraint({t_out: 1.0, t_in: -1.0}, "<=", d / u_min, f"vmin[{v.id}]")
        for c, dc in zip(path.points[1:-1], path.dist[1:-1]):
            r = dc / d
            model.add_constraint({vm.t[(v.id, c)]: 1.0, t_in: -(1.0 - r), t_out: -r}, "=", 0.0, f"speed[{v.id},{c}]")

    for lane, queue in pool.items():
        for i, v in enumerate(queue):
            for v2 in queue[i + 1 :]:
                model.add_constraint({vm.z[v2.id]: 1.0, vm.z[v.id]: -1.0}, "<=", 0.0, f"order[{v.id},{v2.id}]")
                for c in geometry.shared((lane, v.dst), (lane, v2.dst)):
                    model.add_constraint(
                        {vm.t[(v.id, c)]: 1.0, vm.tau[(v.id, c)]: 1.0, vm.t[(v2.id, c)]: -1.0}, "<=", 0.0, f"fifo[{v.id},{v2.id},{c}]"
                    )

    for n, (lane, _, v) in enumerate(vehicles):
        for lane2, _, v2 in vehicles[n + 1 :]:
            if lane2 == lane:
                continue
            for c in geometry.shared((lane, v.dst), (lane2, v2.dst)):
                delta = model.add_var(f"delta[{v.id},{v2.id},{c}]", 0.0, 1.0, integer=True)
                vm.delta[(v.id, v2.id, c)] = delta
                tv, tauv = vm.t[(v.id, c)], vm.tau[(v.id, c)]
                tw, tauw = vm.t[(v2.id, c)], vm.tau[(v2.id, c)]
                zv, zw = vm.z[v.id], vm.z[v2.id]
                # delta = 1: v clears c before v2 arrives; delta = 0: the reverse
                if not compact:
                    model.add_constraint({tv: 1.0, tauv: 1.0, tw: -1.0, delta: big_m}, "<=", big_m, f"sep[{v.id},{v2.id},{c}]")
                    model.add_constraint({tw: 1.0, tauw: 1.0, tv: -1.0, delta: -big_m}, "<=", 0.0, f"sep[{v2.id},{v.id},{c}]")
                    continue
                # while both are served, a reservation at c starts no earlier
                # than the approach allows and ends early enough to finish the path
                pv, pw = geometry.paths[(lane, v.dst)], geometry.paths[(lane2, v2.dst)]
                dv, dw = pv.dist[pv.points.index(c)], pw.dist[pw.points.index(c)]
                start_v, start_w = earliest[v.id] + dv / u_max, earliest[v2.id] + dw / u_max
                end_v, end_w = dt - (pv.length - dv) / u_max, dt - (pw.length - dw) / u_max
                hold_v = vm.lengths[v.id] / w + vm.lengths[v.id] / u_max
                hold_w = vm.lengths[v2.id] / w + vm.lengths[v2.id] / u_max
                m_vw, m_wv = max(end_v - start_w, 0.0), max(end_w - start_v, 0.0)
                model.add_constraint({tv: 1.0, tauv: 1.0, tw: -1.0, delta: m_vw, zv: big_m}, "<=", m_vw + big_m,
                                     f"sep[{v.id},{v2.id},{c}]")
                model.add_constraint({tw: 1.0, tauw: 1.0, tv: -1.0, delta: -m_wv, zw: big_m}, "<=", big_m,
                                     f"sep[{v2.id},{v.id},{c}]")
                model.add_constraint({delta: 1.0, zv: -1.0, zw: 1.0}, ">=", 0.0, f"first[{v.id},{v2.id},{c}]")
                model.add_constraint({delta: 1.0, zv: -1.0, zw: 1.0}, "<=", 1.0, f"first[{v2.id},{v.id},{c}]")
                v_first_ok = start_v + hold_v <= end_w - hold_w + TOL
                w_first_ok = start_w + hold_w <= end_v - hold_v + TOL
                if not w_first_ok:
                    model.add_constraint({delta: 1.0, zv: -1.0}, ">=", 0.0, f"only_first[{v.id},{v2.id},{c}]")
                if not v_first_ok:
                    model.add_constraint({delta: 1.0, zw: 1.0}, "<=", 1.0, f"only_first[{v2.id},{v.id},{c}]")

    if compact:
        users: dict[int, list] = {}
        for lane, _, v in vehicles:
            for c in geometry.paths[(lane, v.dst)].points:
                users.setdefault(c, []).append((lane, v))
        for c, vs in sorted(users.items()):
            if len(vs) < 2:
                continue
            # served reservations at c are disjoint, so those confined to a
            # window [lo, hi] by approach and remaining path must fit inside it
            span = {}
            for lane, v in vs:
                path = geometry.paths[(lane, v.dst)]
                d = path.dist[path.points.index(c)]
                span[v.id] = (earliest[v.id] + d / u_max, dt - (path.length - d) / u_max)
            hold = {v.id: vm.lengths[v.id] / w + vm.lengths[v.id] / u_max for _, v in vs}
            cuts: dict = {}
            for lo in sorted({a for a, _ in span.values()}):
                for hi in sorted({b for _, b in span.values()}):
                    inside = tuple(sorted(i for i, (a, b) in span.items() if a >= lo - TOL and b <= hi + TOL))
                    room = hi - lo
                    if len(inside) >= 2 and sum(hold[i] for i in inside) > room + TOL:
                        cuts[inside] = min(room, cuts.get(inside, room))
            for n, (inside, room) in enumerate(sorted(cuts.items())):
                coeffs = {vm.z[i]: hold[i] for i in inside}
                model.add_constraint(coeffs, "<=", max(room, 0.0), f"cap[{c},{n}]")

    model.set_objective({vm.z[v.id]: vm.weights[lane] for lane, _, v in vehicles})
    return model, vm


def extract_blue_outcome(solution: MilpSolution, vm: BlueVarMap, sbar: Mapping[Key, float]) -> PhaseOutcome:
    """Service rates, served vehicles and a full schedule from an optimal solve.

    Unserved vehicles are rescheduled one at a time at free flow after the
    period ends, which keeps the whole schedule conflict-free whatever the
    solver left them with.
    """
    if not solution.optimal:
        raise ExtractionError(f"blue model at {vm.node} is {solution.status}, not optimal")
    out = PhaseOutcome(vm.node, "blue", solution.objective, solve_time=solution.solve_time, nodes=solution.nodes)
    counts: dict[Key, int] = {}
    for lane, queue in vm.pool.items():
        out.lane_rates[lane] = 0.0
        out.served[lane] = []
        for k, v in enumerate(queue):
            key = (lane, v.dst)
            served = solution.value(vm.z[v.id]) > 0.5
            path = vm.geometry.paths[key]
            rec = ScheduleRecord(
                vehicle=v.id,
                lane=lane,
                key=key,
                order=k,
                served=served,
                entry_time=v.entry_time,
                length=vm.lengths[v.id],
                min_speed=vm.min_speed,
                max_speed=vm.max_speed,
                points=[(c, solution.value(vm.t[(v.id, c)]), solution.value(vm.tau[(v.id, c)])) for c in path.points],
            )
            out.schedules.append(rec)
            if served:
                counts[key] = counts.get(key, 0) + 1
                out.served[lane].append(v.id)
                out.lane_rates[lane] += 1.0
    _defer_unserved(out.schedules, vm)
    for key, s in sbar.items():
        n = counts.get(key, 0)
        out.y[key] = float(n)
        out.a[key] = n / s if s > 0 else 0.0
        out.b[key] = 1 if out.a[key] > 0 else 0
    return out


def _defer_unserved(schedules: list[ScheduleRecord], vm: BlueVarMap) -> None:
    cursor = vm.t0 + vm.dt
    waiting = sorted((r for r in schedules if not r.served), key=lambda r: (r.order, r.lane))
    for r in waiting:
        path = vm.geometry.paths[r.key]
        start = max(cursor, r.entry_time)
        travel = path.length / vm.max_speed
        tau = r.length / vm.wave_speed + r.length / vm.max_speed
        r.points = [(c, start + travel * d / path.length, tau) for c, d in zip(path.points, path.dist)]
        cursor = start + travel + tau


@dataclass
class Violation:
    kind: str  # window | entry | fifo | separation | speed | constant_speed | tau
    detail: str


@dataclass
class VerificationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def verify_blue_schedule(
    schedules: Sequence[ScheduleRecord],
    geometry: Geometry,
    t: float,
    dt: float,
    wave_speed: float = 11.0,
    tol: float = TOL,
) -> VerificationReport:
    """Re-check every reservation rule on a set of schedules, without the solver."""
    out: list[Violation] = []
    for r in schedules:
        path = geometry.paths[r.key]
        times = dict((c, (a, d)) for c, a, d in r.points)
        if [c for c, _, _ in r.points] != list(path.points):
            out.append(Violation("constant_speed", f"{r.vehicle}: points differ from the path template"))
            continue
        t_in, t_out = r.points[0][1], r.points[-1][1]
        travel = t_out - t_in
        if t_in < max(t, r.entry_time) - tol:
            out.append(Violation("entry", f"{r.vehicle}: enters at {t_in:.6f} before {max(t, r.entry_time):.6f}"))
        if travel < path.length / r.max_speed - tol or travel > path.length / r.min_speed + tol:
            out.append(Violation("speed", f"{r.vehicle}: crossing time {travel:.6f}s outside speed bounds"))
        for c, dc in zip(path.points, path.dist):
            expect = t_in + travel * dc / path.length
            if abs(times[c][0] - expect) > tol:
                out.append(Violation("constant_speed", f"{r.vehicle}@{c}: arrival {times[c][0]:.6f}, expected {expect:.6f}"))
            tau = r.length / wave_speed + r.length * travel / path.length
            if abs(times[c][1] - tau) > tol:
                out.append(Violation("tau", f"{r.vehicle}@{c}: reservation {times[c][1]:.6f}, expected {tau:.6f}"))
        if r.served and t_out + times[path.exit][1] > t + dt + tol:
            out.append(Violation("window", f"{r.vehicle}: clears at {t_out + times[path.exit][1]:.6f} after {t + dt}"))

    for i, r in enumerate(schedules):
        ti = {c: (a, d) for c, a, d in r.points}
        for r2 in schedules[i + 1 :]:
            tj = {c: (a, d) for c, a, d in r2.points}
            for c in set(ti) & set(tj):
                (a1, d1), (a2, d2) = ti[c], tj[c]
                if r.lane == r2.lane:
                    first, second = (r, r2) if r.order < r2.order else (r2, r)
                    (fa, fd), (sa, _) = ((a1, d1), (a2, d2)) if first is r else ((a2, d2), (a1, d1))
                    if fa + fd > sa + tol:
                        out.append(Violation("fifo", f"{second.vehicle} reaches {c} at {sa:.6f} before leader {first.vehicle} clears it at {fa + fd:.6f}"))
                elif a1 + d1 > a2 + tol and a2 + d2 > a1 + tol:
                    out.append(Violation("separation", f"{r.vehicle} and {r2.vehicle} overlap at point {c}"))
    return VerificationReport(out)


def schedules_csv(schedules: Sequence[ScheduleRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["vehicle", "lane", "served", "point", "arrival", "duration"])
    for r in schedules:
        for c, a, d in r.points:
            writer.writerow([r.vehicle, r.lane, int(r.served), c, f"{a:.6f}", f"{d:.6f}"])
    return buf.getvalue()
