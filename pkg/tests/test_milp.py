import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_pressure.milp import (
    CapacityError,
    MilpModel,
    ModelError,
    ResourceLimitError,
    enumerate_solve,
    solve,
    solve_lp,
)

from milp_cases import random_milp


def knapsack():
    m = MilpModel("knap")
    w = [3, 4, 5, 9]
    v = [4, 5, 6, 11]
    xs = [m.add_var(f"x{k}", 0, 1, integer=True) for k in range(4)]
    m.add_constraint(dict(zip(xs, w)), "<=", 12)
    m.set_objective(dict(zip(xs, v)))
    return m


@pytest.mark.parametrize("backend", ["highs", "native"])
def test_knapsack(backend):
    sol = solve(knapsack(), backend)
    assert sol.optimal
    # items 0 and 3 (weight 12, value 15)
    assert sol.objective == pytest.approx(15.0)
    assert not sol.model.violations(sol.x)


def test_enumeration_agrees_on_knapsack():
    assert enumerate_solve(knapsack()).objective == pytest.approx(15.0)


def test_general_integers_enumerated():
    m = MilpModel()
    x = m.add_var("x", 0, 3, integer=True)
    y = m.add_var("y", 0, 3, integer=True)
    m.add_constraint({x: 2, y: 3}, "<=", 7.5)
    m.set_objective({x: 1, y: 1.4})
    assert enumerate_solve(m).objective == pytest.approx(solve(m).objective)
    assert solve(m, "native").objective == pytest.approx(solve(m).objective)


@pytest.mark.parametrize("backend", ["highs", "native"])
def test_infeasible(backend):
    m = MilpModel()
    x = m.add_var("x", 0, 1, integer=True)
    m.add_constraint({x: 1}, ">=", 2)
    assert solve(m, backend).status == "infeasible"
    assert enumerate_solve(m).status == "infeasible"


def test_empty_model():
    sol = solve(MilpModel())
    assert sol.optimal and sol.objective == 0.0


def test_model_errors():
    m = MilpModel()
    m.add_var("x", 0, 1)
    with pytest.raises(ModelError):
        m.add_var("x", 0, 1)
    with pytest.raises(ModelError):
        m.add_var("y", 0, math.inf)
    with pytest.raises(ModelError):
        m.add_constraint({5: 1.0}, "<=", 1)
    with pytest.raises(ModelError):
        m.add_constraint({0: 1.0}, "<", 1)


def test_enumeration_cap():
    m = MilpModel()
    for j in range(30):
        m.add_var(f"b{j}", 0, 1, integer=True)
    with pytest.raises(CapacityError):
        enumerate_solve(m)


def test_native_node_limit():
    m = MilpModel()
    x = m.add_var("x", 0, 1, integer=True)
    y = m.add_var("y", 0, 1, integer=True)
    m.add_constraint({x: 2, y: 2}, "<=", 3)  # relaxation is fractional
    m.set_objective({x: 1, y: 1})
    with pytest.raises(ResourceLimitError):
        solve(m, "native", node_limit=1)
    assert solve(m, "native").objective == pytest.approx(1.0)


def test_lp_simplex_matches_known_optimum():
    # max 3x + 2y, x + y <= 4, x + 3y <= 6, 0 <= x <= 3
    res = solve_lp(np.array([3.0, 2.0]), np.array([[1.0, 1.0], [1.0, 3.0]]), ["<=", "<="],
                   np.array([4.0, 6.0]), np.array([0.0, 0.0]), np.array([3.0, 10.0]))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(11.0)
    assert res.x == pytest.approx([3.0, 1.0])


def test_lp_equality_and_negative_bounds():
    res = solve_lp(np.array([1.0, -1.0]), np.array([[1.0, 1.0]]), ["="], np.array([1.0]),
                   np.array([-2.0, -2.0]), np.array([2.0, 2.0]))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(3.0)


def test_lp_text_lists_every_row():
    text = knapsack().to_lp_text()
    assert text.startswith("Maximize") or "Maximize" in text
    assert "Binary" in text or "General" in text
    assert text.rstrip().endswith("End")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_bin=st.integers(1, 8), n_cont=st.integers(0, 3), n_rows=st.integers(1, 6))
def test_backends_agree_with_enumeration(seed, n_bin, n_cont, n_rows):
    m = random_milp(np.random.default_rng(seed), n_bin, n_cont, n_rows)
    ref = enumerate_solve(m)
    for backend in ("highs", "native"):
        sol = solve(m, backend)
        assert sol.status == ref.status
        if ref.optimal:
            assert sol.objective == pytest.approx(ref.objective, abs=1e-6)
            assert not m.violations(sol.x)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_adding_a_row_never_improves(seed):
    rng = np.random.default_rng(seed)
    m = random_milp(rng, 6, 2, 4)
    before = solve(m)
    m.add_constraint({0: 1.0, 1: 1.0}, "<=", 1.0, "extra")
    after = solve(m)
    if before.optimal and after.optimal:
        assert after.objective <= before.objective + 1e-6
    if not before.optimal:
        assert not after.optimal
