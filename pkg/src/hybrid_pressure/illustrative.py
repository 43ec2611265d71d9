"""The single-intersection worked example: fixed queues, no downstream traffic."""
from __future__ import annotations

from dataclasses import dataclass

from .blue import BlueVehicle, build_blue_model, build_conflict_geometry, extract_blue_outcome
from .green import build_green_model, extract_green_outcome
from .milp import solve
from .network import IntersectionSpec, PhysicalParams, VehicleClass, build_grid
from .outcome import PhaseOutcome

QUEUES = {"S": 10, "W": 4, "N": 2, "E": 7}
TURN_SHARES = {"right": 0.1, "through": 0.8, "left": 0.1}
AV_ROUTES = {
    "S": "NENNWNNNNN",
    "W": "EESW",
    "N": "SS",
    "E": "WWWNSWW",
}
REFERENCE_BLUE_OBJECTIVE = 55.0


@dataclass
class IllustrativeResult:
    spec: IntersectionSpec
    green: PhaseOutcome
    blue: PhaseOutcome
    green_model_size: tuple[int, int]
    blue_model_size: tuple[int, int]


def illustrative_instance(params: PhysicalParams = PhysicalParams()):
    """Intersection spec, LV queues, weights, turning shares and AV queues."""
    net = build_grid(1, 1, params)
    spec = net.intersections["r0c0"]
    lv = {spec.incoming[s][VehicleClass.LV]: float(q) for s, q in QUEUES.items()}
    p = {mv.key: TURN_SHARES[mv.turn] for mv in spec.lv_movements}
    av_queues = {}
    av_weights = {}
    for side, route in AV_ROUTES.items():
        lane = spec.incoming[side][VehicleClass.AV]
        av_weights[lane] = float(QUEUES[side])
        av_queues[lane] = [
            BlueVehicle(f"{side}{k}", spec.outgoing[out][VehicleClass.AV], 0.0) for k, out in enumerate(route)
        ]
    return spec, lv, dict(lv), p, av_queues, av_weights


def run_illustrative(params: PhysicalParams = PhysicalParams(), backend: str = "highs") -> IllustrativeResult:
    spec, queues, weights, p, av_queues, av_weights = illustrative_instance(params)
    gm, gvm = build_green_model(spec, queues, weights, p)
    green = extract_green_outcome(solve(gm, backend), gvm)
    geometry = build_conflict_geometry(spec, params.width)
    bm, bvm = build_blue_model(spec, av_queues, av_weights, 0.0, params.dt, params, geometry)
    sbar = {mv.key: mv.sbar for mv in spec.av_movements}
    blue = extract_blue_outcome(solve(bm, backend), bvm, sbar)
    return IllustrativeResult(spec, green, blue, (gm.n_vars, len(gm.constraints)), (bm.n_vars, len(bm.constraints)))
