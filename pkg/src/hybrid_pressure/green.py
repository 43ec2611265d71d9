"""Green-phase model: maximum-pressure activation of legacy-vehicle movements.

Movement capacity is endogenous. Yield movements only get the slack left by
the conflicting movements, and a lane-level FIFO factor scales the demand of
every movement out of a blocked lane.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .milp import MilpModel, MilpSolution
from .network import IntersectionSpec, Movement, MovementType, VehicleClass
from .outcome import ExtractionError, Key, PhaseOutcome

EPS = 1e-9


class GreenInputError(ValueError):
    pass


@dataclass
class GreenVarMap:
    node: str
    movements: list[Movement]
    demand: dict[Key, float]  # p_ij * x_i
    weights: dict[str, float]
    y: dict[Key, int] = field(default_factory=dict)
    a: dict[Key, int] = field(default_factory=dict)
    b: dict[Key, int] = field(default_factory=dict)
    m: dict[Key, int] = field(default_factory=dict)
    lam: dict[Key, int] = field(default_factory=dict)
    big_m: dict[Key, float] = field(default_factory=dict)
    phi: dict[str, int] = field(default_factory=dict)
    lanes: list[str] = field(default_factory=list)


def build_green_model(
    spec: IntersectionSpec,
    queues: Mapping[str, float],
    weights: Mapping[str, float],
    p: Mapping[Key, float],
) -> tuple[MilpModel, GreenVarMap]:
    """Assemble the green-phase MILP for one intersection.

    Only movements with a positive turning proportion take part, matching the
    definition of the LV movement set.
    """
    lanes = spec.lanes_in(VehicleClass.LV)
    for lane in lanes:
        if lane not in queues:
            raise GreenInputError(f"queue length missing for lane {lane!r} at {spec.id}")
    movements = [mv for mv in spec.lv_movements if p.get(mv.key, 0.0) > 0.0]
    demand = {mv.key: p[mv.key] * float(queues[mv.src]) for mv in movements}
    vm = GreenVarMap(spec.id, movements, demand, {l: float(weights.get(l, 0.0)) for l in lanes}, lanes=lanes)

    model = MilpModel(name=f"green[{spec.id}]")
    for lane in lanes:
        vm.phi[lane] = model.add_var(f"phi[{lane}]", 0.0, 1.0)
    for k, mv in enumerate(movements):
        vm.y[mv.key] = model.add_var(f"y[{k}]", 0.0, mv.sbar)
        vm.a[mv.key] = model.add_var(f"a[{k}]", 0.0, 1.0)
        vm.b[mv.key] = model.add_var(f"b[{k}]", 0.0, 1.0, integer=True)
        vm.m[mv.key] = model.add_var(f"m[{k}]", 0.0, mv.sbar)
        vm.lam[mv.key] = model.add_var(f"lambda[{k}]", 0.0, 1.0, integer=True)
        vm.big_m[mv.key] = max(mv.sbar, demand[mv.key]) + 1.0

    for k, mv in enumerate(movements):
        key = mv.key
        y, a, b, m, lam, phi = vm.y[key], vm.a[key], vm.b[key], vm.m[key], vm.lam[key], vm.phi[mv.src]
        s, d, M = mv.sbar, demand[key], vm.big_m[key]
        model.add_constraint({y: 1.0, a: -s}, "<=", 0.0, f"supply[{k}]")
        model.add_constraint({y: 1.0, phi: -d}, "<=", 0.0, f"demand[{k}]")
        if d > 0.0:
            model.add_constraint({phi: d, a: -s}, "<=", 0.0, f"fifo[{k}]")
        if mv.mtype is MovementType.YIELD:
            coeffs = {a: s}
            for other in spec.conflicts[key]:
                if other in vm.m:
                    coeffs[vm.m[other]] = coeffs.get(vm.m[other], 0.0) - 1.0
            model.add_constraint(coeffs, "<=", 0.0, f"yield[{k}]")
        model.add_constraint({a: 1.0, b: -1.0}, "<=", 0.0, f"link[{k}]")
        # slack m = max(a*s - d*phi, 0) through the sign binary lambda
        model.add_constraint({lam: M, a: -s, phi: d}, "<=", M, f"sign_lo[{k}]")
        model.add_constraint({lam: M, a: -s, phi: d}, ">=", 0.0, f"sign_hi[{k}]")
        model.add_constraint({m: 1.0, a: -s, phi: d, lam: M}, "<=", M, f"slack_ub[{k}]")
        model.add_constraint({m: 1.0, a: -s, phi: d}, ">=", 0.0, f"slack_lb[{k}]")
        model.add_constraint({m: 1.0, lam: -M}, "<=", 0.0, f"slack_on[{k}]")

    index = {mv.key: n for n, mv in enumerate(spec.lv_movements)}
    for u, mv in enumerate(movements):
        for other in movements[u + 1 :]:
            if spec.g[index[mv.key], index[other.key]]:
                model.add_constraint({vm.b[mv.key]: 1.0, vm.b[other.key]: 1.0}, "<=", 1.0, f"forbid[{mv.key}|{other.key}]")

    model.set_objective({vm.y[mv.key]: vm.weights[mv.src] for mv in movements})
    return model, vm


def extract_green_outcome(solution: MilpSolution, vm: GreenVarMap) -> PhaseOutcome:
    if not solution.optimal:
        raise ExtractionError(f"green model at {vm.node} is {solution.status}, not optimal")
    out = PhaseOutcome(vm.node, "green", solution.objective, solve_time=solution.solve_time, nodes=solution.nodes)
    for lane in vm.lanes:
        out.lane_rates[lane] = 0.0
        out.phi[lane] = solution.value(vm.phi[lane])
    for mv in vm.movements:
        key = mv.key
        y = max(solution.value(vm.y[key]), 0.0)
        out.y[key] = y
        out.a[key] = min(max(solution.value(vm.a[key]), 0.0), 1.0)
        out.b[key] = int(round(solution.value(vm.b[key])))
        out.lane_rates[mv.src] += y
    return out


def saturate_green_service(outcome: PhaseOutcome, spec: IntersectionSpec, vm: GreenVarMap) -> dict[Key, float]:
    """Service fractions to realise in simulation for a green outcome.

    Active priority movements get full capacity (``a = b``); active yield
    movements get the slack their conflicting movements leave at that
    capacity, capped at 1. Both changes keep the solve's constraints satisfied
    and leave its objective unchanged; they only remove the arbitrary choice
    among optimal ``a`` values that serve the same expected flow.
    """
    a = {}
    slack = {}
    for mv in vm.movements:
        if mv.mtype is MovementType.PRIORITY:
            a[mv.key] = float(outcome.b.get(mv.key, 0))
            d = vm.demand[mv.key] * outcome.phi.get(mv.src, 1.0)
            slack[mv.key] = max(a[mv.key] * mv.sbar - d, 0.0)
    for mv in vm.movements:
        if mv.mtype is MovementType.YIELD:
            if not outcome.b.get(mv.key, 0):
                a[mv.key] = 0.0
                continue
            avail = sum(slack.get(o, 0.0) for o in spec.conflicts[mv.key])
            a[mv.key] = max(outcome.a[mv.key], min(1.0, avail / mv.sbar if mv.sbar > 0 else 0.0))
    return a
