import time
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_pressure.blue import (
    BlueInputError,
    BlueVehicle,
    build_blue_model,
    build_conflict_geometry,
    extract_blue_outcome,
    schedules_csv,
    verify_blue_schedule,
)
from hybrid_pressure.illustrative import REFERENCE_BLUE_OBJECTIVE, run_illustrative
from hybrid_pressure.milp import MilpSolution, solve
from hybrid_pressure.network import VehicleClass
from hybrid_pressure.outcome import ExtractionError

from blue_cases import PERTURBATIONS, perturb, random_queues, solved_instance


@pytest.fixture(scope="module")
def spec(single):
    return single.intersections["r0c0"]


@pytest.fixture(scope="module")
def geometry(spec):
    return build_conflict_geometry(spec)


def test_point_counts_per_turn(geometry):
    counts = {}
    for path in geometry.paths.values():
        counts.setdefault(path.turn, set()).add(len(path.points))
    assert counts == {"right": {2}, "through": {6}, "left": {6}}
    assert len(geometry.points) == 24


def test_paths_run_forward(geometry):
    for path in geometry.paths.values():
        assert path.dist[0] == 0.0
        assert all(b > a for a, b in zip(path.dist, path.dist[1:]))
        assert len(set(path.points)) == len(path.points)


def test_paths_share_points_symmetrically(geometry):
    keys = list(geometry.paths)
    for a in keys:
        for b in keys:
            assert set(geometry.shared(a, b)) == set(geometry.shared(b, a))


def test_worked_example():
    start = time.perf_counter()
    res = run_illustrative()
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    assert 50.0 <= res.blue.objective <= 70.0
    assert res.blue.objective == pytest.approx(REFERENCE_BLUE_OBJECTIVE, abs=1e-6)
    for a in res.blue.a.values():
        assert a * 5 == pytest.approx(round(a * 5), abs=1e-9)
    geometry = build_conflict_geometry(res.spec)
    assert verify_blue_schedule(res.blue.schedules, geometry, 0.0, 10.0).ok


def test_unknown_lane_rejected(spec, geometry):
    src = spec.incoming["N"][VehicleClass.LV]
    with pytest.raises(BlueInputError):
        build_blue_model(spec, {src: [BlueVehicle(1, spec.outgoing["S"][VehicleClass.AV], 0.0)]}, {src: 1.0},
                         0.0, 10.0, geometry=geometry)


def test_bad_destination_rejected(spec, geometry):
    lane = spec.incoming["N"][VehicleClass.AV]
    with pytest.raises(BlueInputError):
        build_blue_model(spec, {lane: [BlueVehicle(1, "nowhere", 0.0)]}, {lane: 1.0}, 0.0, 10.0, geometry=geometry)


def test_u_turn_blocks_its_lane(spec, geometry):
    lane = spec.incoming["N"][VehicleClass.AV]
    queue = [BlueVehicle(1, spec.outgoing["S"][VehicleClass.AV], 0.0),
             BlueVehicle(2, spec.outgoing["N"][VehicleClass.AV], 0.0),
             BlueVehicle(3, spec.outgoing["S"][VehicleClass.AV], 0.0)]
    _, vm = build_blue_model(spec, {lane: queue}, {lane: 1.0}, 0.0, 10.0, geometry=geometry)
    assert [v.id for v in vm.pool[lane]] == [1]


def test_one_lane_alone_serves_four(spec, geometry):
    lane = spec.incoming["S"][VehicleClass.AV]
    queue = [BlueVehicle(k, spec.outgoing["N"][VehicleClass.AV], 0.0) for k in range(8)]
    model, vm = build_blue_model(spec, {lane: queue}, {lane: 2.0}, 0.0, 10.0, geometry=geometry)
    out = extract_blue_outcome(solve(model), vm, {m.key: m.sbar for m in spec.av_movements})
    # 2 s entry headway and a 1.1 s crossing fit four vehicles into 10 s
    assert out.served[lane] == [0, 1, 2, 3]
    assert out.objective == pytest.approx(8.0)


def test_zero_weight_lanes_are_ignored(spec, geometry):
    lane = spec.incoming["S"][VehicleClass.AV]
    queue = [BlueVehicle(0, spec.outgoing["N"][VehicleClass.AV], 0.0)]
    model, vm = build_blue_model(spec, {lane: queue}, {lane: 0.0}, 0.0, 10.0, geometry=geometry)
    assert model.n_vars == 0 and not vm.pool


def test_late_arrival_respected(spec, geometry):
    lane = spec.incoming["S"][VehicleClass.AV]
    queue = [BlueVehicle(0, spec.outgoing["N"][VehicleClass.AV], 6.0)]
    model, vm = build_blue_model(spec, {lane: queue}, {lane: 1.0}, 0.0, 10.0, geometry=geometry)
    out = extract_blue_outcome(solve(model), vm, {m.key: m.sbar for m in spec.av_movements})
    assert out.served[lane] == [0]
    assert out.schedules[0].points[0][1] >= 6.0 - 1e-9


def test_non_optimal_rejected(spec, geometry):
    lane = spec.incoming["S"][VehicleClass.AV]
    _, vm = build_blue_model(spec, {lane: [BlueVehicle(0, spec.outgoing["N"][VehicleClass.AV], 0.0)]},
                             {lane: 1.0}, 0.0, 10.0, geometry=geometry)
    with pytest.raises(ExtractionError):
        extract_blue_outcome(MilpSolution("infeasible"), vm, {})


def test_schedule_csv(spec, geometry, params):
    out, _ = solved_instance(np.random.default_rng(1), spec, geometry, params)
    text = schedules_csv(out.schedules)
    assert text.splitlines()[0] == "vehicle,lane,served,point,arrival,duration"
    assert len(text.splitlines()) == 1 + sum(len(r.points) for r in out.schedules)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.sampled_from([0.0, 130.0]))
def test_solved_schedules_verify(spec, geometry, params, seed, t):
    out, model = solved_instance(np.random.default_rng(seed), spec, geometry, params, t=t)
    report = verify_blue_schedule(out.schedules, geometry, t, params.dt, params.w)
    assert report.ok, report.violations
    # served vehicles form a prefix of every lane
    for lane, ids in out.served.items():
        recs = sorted((r for r in out.schedules if r.lane == lane), key=lambda r: r.order)
        flags = [r.served for r in recs]
        assert flags == sorted(flags, reverse=True)
        assert len(ids) == sum(flags)
    counts = Counter(r.key for r in out.schedules if r.served)
    for key, a in out.a.items():
        assert a == pytest.approx(counts.get(key, 0) / 5.0)
        assert out.b[key] == (1 if counts.get(key, 0) else 0)


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_compact_and_full_models_agree(spec, geometry, params, seed):
    rng = np.random.default_rng(seed)
    queues, weights = random_queues(rng, spec, max_len=3)
    sbar = {m.key: m.sbar for m in spec.av_movements}
    full = solve(build_blue_model(spec, queues, weights, 0.0, 10.0, params, geometry, compact=False)[0])
    model, vm = build_blue_model(spec, queues, weights, 0.0, 10.0, params, geometry, compact=True)
    compact = solve(model)
    assert compact.objective == pytest.approx(full.objective, abs=1e-6)
    out = extract_blue_outcome(compact, vm, sbar)
    assert verify_blue_schedule(out.schedules, geometry, 0.0, 10.0).ok


@pytest.mark.parametrize("kind", PERTURBATIONS)
def test_each_perturbation_is_caught(spec, geometry, params, kind):
    rng = np.random.default_rng(7)
    for _ in range(50):
        out, _ = solved_instance(rng, spec, geometry, params)
        broken = perturb(kind, out.schedules, geometry, 0.0, params.dt, params.w)
        if broken is not None:
            report = verify_blue_schedule(broken, geometry, 0.0, params.dt, params.w)
            assert report.kinds == {kind}
            return
    pytest.fail(f"no instance could host a {kind} perturbation")
