"""Random blue-phase instances and single-rule perturbations of their schedules."""
from dataclasses import replace

import numpy as np

from hybrid_pressure.blue import BlueVehicle, build_blue_model, extract_blue_outcome
from hybrid_pressure.milp import solve
from hybrid_pressure.network import VehicleClass, opposite

PERTURBATIONS = ("entry", "window", "speed", "constant_speed", "tau", "fifo", "separation")


def random_queues(rng: np.random.Generator, spec, max_len: int = 4):
    queues, weights = {}, {}
    for side in "NESW":
        lane = spec.incoming[side][VehicleClass.AV]
        outs = [s for s in "NESW" if s != side]
        n = int(rng.integers(0, max_len + 1))
        queues[lane] = [BlueVehicle(f"{side}{k}", spec.outgoing[str(rng.choice(outs))][VehicleClass.AV], 0.0)
                        for k in range(n)]
        weights[lane] = float(rng.integers(1, 11))
    return queues, weights


def solved_instance(rng, spec, geometry, params, t=0.0, compact=True, max_len=4):
    queues, weights = random_queues(rng, spec, max_len)
    model, vm = build_blue_model(spec, queues, weights, t, params.dt, params, geometry, compact=compact)
    sbar = {mv.key: mv.sbar for mv in spec.av_movements}
    return extract_blue_outcome(solve(model), vm, sbar), model


def _shift(rec, delta):
    return replace(rec, points=[(c, a + delta, d) for c, a, d in rec.points])


def perturb(kind, schedules, geometry, t, dt, wave_speed):
    """A copy of part of ``schedules`` breaking exactly one rule, or None if this schedule cannot host it."""
    served = [r for r in schedules if r.served]
    if kind in ("entry", "window", "speed", "constant_speed", "tau"):
        for r in served:
            path = geometry.paths[r.key]
            t_in = r.points[0][1]
            if kind == "entry":
                return [_shift(r, max(t, r.entry_time) - t_in - 0.5)]
            if kind == "window":
                clear = r.points[-1][1] + r.points[-1][2]
                return [_shift(r, t + dt - clear + 1.0)]
            if kind == "speed":
                travel = 0.5 * path.length / r.max_speed
                tau = r.length / wave_speed + r.length * travel / path.length
                return [replace(r, points=[(c, t_in + travel * d / path.length, tau)
                                           for c, d in zip(path.points, path.dist)])]
            if kind == "constant_speed" and len(r.points) >= 3:
                pts = list(r.points)
                c, a, d = pts[1]
                pts[1] = (c, a + 0.3, d)
                return [replace(r, points=pts)]
            if kind == "tau":
                pts = list(r.points)
                c, a, d = pts[0]
                pts[0] = (c, a, d + 0.2)
                return [replace(r, points=pts)]
        return None
    for i, r in enumerate(served):
        for r2 in served[i + 1:]:
            if kind == "fifo" and r.lane == r2.lane:
                lead, follow = (r, r2) if r.order < r2.order else (r2, r)
                delta = lead.points[0][1] + 0.5 * lead.points[0][2] - follow.points[0][1]
                moved = _shift(follow, delta)
                if moved.points[-1][1] + moved.points[-1][2] <= t + dt:
                    return [lead, moved]
            if kind == "separation" and r.lane != r2.lane:
                shared = set(c for c, _, _ in r.points) & set(c for c, _, _ in r2.points)
                for c in sorted(shared):
                    a1 = dict((p, a) for p, a, _ in r.points)[c]
                    a2 = dict((p, a) for p, a, _ in r2.points)[c]
                    moved = _shift(r2, a1 - a2)
                    ok_entry = moved.points[0][1] >= t
                    ok_window = moved.points[-1][1] + moved.points[-1][2] <= t + dt
                    if ok_entry and ok_window:
                        return [r, moved]
    return None
