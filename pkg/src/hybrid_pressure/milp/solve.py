from __future__ import annotations

import heapq
import itertools
import math
import time
import warnings

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse import csr_array, vstack

from .model import (
    INT_TOL,
    CapacityError,
    MilpError,
    MilpModel,
    MilpSolution,
    ResourceLimitError,
)
from .simplex import solve_lp

MAX_ENUM_INTEGERS = 24
GAP_TOL = 1e-9


def _snap(model: MilpModel, x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    lb, ub = model.bounds()
    for j in model.integer_indices:
        x[j] = float(round(x[j]))
    return np.clip(x, lb, ub)


def _integer_box(model: MilpModel) -> tuple[np.ndarray, np.ndarray]:
    lb, ub = model.bounds()
    for j in model.integer_indices:
        lb[j] = math.ceil(lb[j] - INT_TOL)
        ub[j] = math.floor(ub[j] + INT_TOL)
    return lb, ub


def solve(
    model: MilpModel,
    backend: str = "highs",
    node_limit: int | None = None,
    time_limit: float | None = None,
) -> MilpSolution:
    """Solve ``model`` to proven optimality.

    ``backend="highs"`` uses scipy's HiGHS branch-and-cut with a zero relative
    gap; ``backend="native"`` runs the built-in best-bound branch-and-bound over
    the dense simplex.
    """
    start = time.perf_counter()
    if backend == "highs":
        sol = _solve_highs(model, node_limit, time_limit)
    elif backend == "native":
        sol = _solve_native(model, node_limit, time_limit)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    sol.solve_time = time.perf_counter() - start
    sol.model = model
    return sol


def _solve_highs(model: MilpModel, node_limit: int | None, time_limit: float | None) -> MilpSolution:
    n = model.n_vars
    if n == 0:
        return MilpSolution("optimal", 0.0, np.zeros(0))
    c = model.objective_vector()
    lb, ub = model.bounds()
    integrality = np.array([1 if v.integer else 0 for v in model.variables])
    constraints = None
    if model.constraints:
        rows, cols, vals = [], [], []
        lo = np.empty(len(model.constraints))
        hi = np.empty(len(model.constraints))
        for r, con in enumerate(model.constraints):
            for j, a in con.coeffs:
                rows.append(r)
                cols.append(j)
                vals.append(a)
            lo[r] = con.rhs if con.sense in (">=", "=") else -np.inf
            hi[r] = con.rhs if con.sense in ("<=", "=") else np.inf
        A = csr_array((vals, (rows, cols)), shape=(len(model.constraints), n))
        constraints = LinearConstraint(A, lo, hi)
    # HiGHS presolve as bundled with scipy 1.15 returns suboptimal points on
    # some small models, so it stays off
    options: dict = {"mip_rel_gap": 0.0, "mip_abs_gap": GAP_TOL, "presolve": False}
    if node_limit is not None:
        options["node_limit"] = node_limit
    if time_limit is not None:
        options["time_limit"] = time_limit
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = milp(-c, integrality=integrality, bounds=Bounds(lb, ub), constraints=constraints, options=options)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 0:
        x = _polish(model, _snap(model, res.x), c, lb, ub, constraints)
        return MilpSolution("optimal", model.evaluate(x), x, nodes)
    if res.status == 2:
        return MilpSolution("infeasible", nodes=nodes)
    if res.status == 3:
        return MilpSolution("unbounded", nodes=nodes)
    if res.status == 1:
        incumbent = None
        if res.x is not None:
            x = _snap(model, res.x)
            incumbent = MilpSolution("feasible", model.evaluate(x), x, nodes, model=model)
        raise ResourceLimitError(f"{model.name}: {res.message}", incumbent)
    raise MilpError(f"{model.name}: HiGHS failed ({res.message})")


def _polish(model: MilpModel, x: np.ndarray, c: np.ndarray, lb: np.ndarray, ub: np.ndarray,
            constraints: LinearConstraint | None) -> np.ndarray:
    """Re-solve the continuous part with the integers fixed, at tight tolerances.

    Branch-and-cut accepts points up to its feasibility tolerance, which can
    move the objective by ~1e-6; this pins it to the vertex.
    """
    ints = model.integer_indices
    if len(ints) == model.n_vars:
        return x
    lo, hi = lb.copy(), ub.copy()
    lo[ints] = hi[ints] = x[ints]
    a_ub, b_ub, a_eq, b_eq = _split_rows(constraints)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = linprog(-c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=np.column_stack([lo, hi]),
                      method="highs", options={"presolve": False, "primal_feasibility_tolerance": 1e-10,
                                               "dual_feasibility_tolerance": 1e-10})
    if res.status != 0 or abs(c @ res.x - c @ x) > 1e-5 * max(1.0, abs(c @ x)):
        return x
    out = np.clip(res.x, lb, ub)
    out[ints] = x[ints]
    return out


def _split_rows(constraints: LinearConstraint | None):
    if constraints is None:
        return None, None, None, None
    A = csr_array(constraints.A)
    lo, hi = np.asarray(constraints.lb), np.asarray(constraints.ub)
    eq = lo == hi
    upper = ~eq & np.isfinite(hi)
    lower = ~eq & np.isfinite(lo)
    a_ub = vstack([A[upper], -A[lower]]).tocsr() if (upper.any() or lower.any()) else None
    b_ub = np.concatenate([hi[upper], -lo[lower]]) if a_ub is not None else None
    return a_ub, b_ub, (A[eq] if eq.any() else None), (hi[eq] if eq.any() else None)


def _solve_native(model: MilpModel, node_limit: int | None, time_limit: float | None) -> MilpSolution:
    c = model.objective_vector()
    A, senses, b = model.dense_rows()
    lb0, ub0 = _integer_box(model)
    ints = model.integer_indices
    deadline = None if time_limit is None else time.perf_counter() + time_limit

    best_x: np.ndarray | None = None
    best = -math.inf
    nodes = 0
    counter = itertools.count()
    heap: list = [(-math.inf, next(counter), lb0, ub0)]
    while heap:
        neg_bound, _, lb, ub = heapq.heappop(heap)
        if best_x is not None and -neg_bound <= best + GAP_TOL * max(1.0, abs(best)):
            break  # best-bound order: nothing left can improve
        if node_limit is not None and nodes >= node_limit or deadline is not None and time.perf_counter() > deadline:
            incumbent = None if best_x is None else MilpSolution("feasible", best, best_x, nodes, model=model)
            raise ResourceLimitError(f"{model.name}: native branch-and-bound limit after {nodes} nodes", incumbent)
        lp = solve_lp(c, A, senses, b, lb, ub)
        nodes += 1
        if lp.status == "infeasible":
            continue
        if lp.status == "unbounded":
            return MilpSolution("unbounded", nodes=nodes)
        if lp.status != "optimal":
            raise MilpError(f"{model.name}: LP relaxation failed ({lp.status})")
        if best_x is not None and lp.objective <= best + GAP_TOL * max(1.0, abs(best)):
            continue
        x = lp.x
        branch_var, branch_score = -1, 0.0
        for j in ints:
            frac = x[j] - math.floor(x[j])
            score = min(frac, 1.0 - frac)
            if score > INT_TOL and score > branch_score + 1e-12:
                branch_var, branch_score = j, score
        if branch_var < 0:
            snapped = _snap(model, x)
            best, best_x = model.evaluate(snapped), snapped
            continue
        j = branch_var
        down_ub = ub.copy()
        down_ub[j] = math.floor(x[j])
        up_lb = lb.copy()
        up_lb[j] = math.ceil(x[j])
        heapq.heappush(heap, (-lp.objective, next(counter), lb, down_ub))
        heapq.heappush(heap, (-lp.objective, next(counter), up_lb, ub))
    if best_x is None:
        return MilpSolution("infeasible", nodes=nodes)
    return MilpSolution("optimal", best, best_x, nodes)


def enumerate_solve(model: MilpModel) -> MilpSolution:
    """Exhaustive oracle: fix every integer assignment and solve the LP left over."""
    start = time.perf_counter()
    ints = model.integer_indices
    if len(ints) > MAX_ENUM_INTEGERS:
        raise CapacityError(f"{len(ints)} integer variables exceed the enumeration cap of {MAX_ENUM_INTEGERS}")
    lb0, ub0 = _integer_box(model)
    ranges = [range(int(lb0[j]), int(ub0[j]) + 1) for j in ints]
    total = math.prod(len(r) for r in ranges)
    if total > 2**MAX_ENUM_INTEGERS:
        raise CapacityError(f"{total} integer assignments exceed the enumeration cap")
    c = model.objective_vector()
    A, senses, b = model.dense_rows()
    best_x, best, count = None, -math.inf, 0
    unbounded = False
    for combo in itertools.product(*ranges):
        lb, ub = lb0.copy(), ub0.copy()
        for j, v in zip(ints, combo):
            lb[j] = ub[j] = v
        lp = solve_lp(c, A, senses, b, lb, ub)
        count += 1
        if lp.status == "unbounded":
            unbounded = True
            continue
        if lp.status == "optimal" and (best_x is None or lp.objective > best + GAP_TOL * max(1.0, abs(best))):
            best, best_x = lp.objective, _snap(model, lp.x)
    elapsed = time.perf_counter() - start
    if unbounded:
        return MilpSolution("unbounded", nodes=count, solve_time=elapsed, model=model)
    if best_x is None:
        return MilpSolution("infeasible", nodes=count, solve_time=elapsed, model=model)
    return MilpSolution("optimal", model.evaluate(best_x), best_x, count, elapsed, model)
