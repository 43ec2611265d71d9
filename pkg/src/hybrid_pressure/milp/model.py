from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

FEAS_TOL = 1e-6
INT_TOL = 1e-6

SENSES = ("<=", ">=", "=")


class MilpError(Exception):
    pass


class ModelError(MilpError):
    """Malformed model: unknown variable, infinite bound, bad sense."""


class ResourceLimitError(MilpError):
    """Node or time limit hit before optimality was proven."""

    def __init__(self, message: str, incumbent: "MilpSolution | None" = None):
        super().__init__(message)
        self.incumbent = incumbent


class CapacityError(MilpError):
    """Too many integer variables for exhaustive enumeration."""


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float
    ub: float
    integer: bool = False


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class MilpModel:
    """A maximisation MILP with finite variable boxes."""

    name: str = "model"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def add_var(self, name: str, lb: float, ub: float, integer: bool = False) -> int:
        if name in self._index:
            raise ModelError(f"duplicate variable {name!r}")
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise ModelError(f"variable {name!r} needs finite bounds, got [{lb}, {ub}]")
        self.variables.append(Variable(name, float(lb), float(ub), integer))
        self._index[name] = len(self.variables) - 1
        return self._index[name]

    def add_constraint(self, coeffs: Mapping[int, float], sense: str, rhs: float, name: str = "") -> None:
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        n = len(self.variables)
        items = []
        for j, a in coeffs.items():
            if not 0 <= j < n:
                raise ModelError(f"constraint {name!r} references undeclared variable {j}")
            if a != 0.0:
                items.append((j, float(a)))
        self.constraints.append(Constraint(tuple(sorted(items)), sense, float(rhs), name))

    def set_objective(self, coeffs: Mapping[int, float]) -> None:
        for j in coeffs:
            if not 0 <= j < len(self.variables):
                raise ModelError(f"objective references undeclared variable {j}")
        self.objective = {j: float(a) for j, a in coeffs.items() if a != 0.0}

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def integer_indices(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.integer]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def dense_rows(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        A = np.zeros((len(self.constraints), self.n_vars))
        for r, con in enumerate(self.constraints):
            for j, a in con.coeffs:
                A[r, j] += a
        senses = [con.sense for con in self.constraints]
        rhs = np.array([con.rhs for con in self.constraints], dtype=float)
        return A, senses, rhs

    def evaluate(self, x: np.ndarray) -> float:
        return float(sum(a * x[j] for j, a in self.objective.items()))

    def violations(self, x: np.ndarray, tol: float = FEAS_TOL) -> list[str]:
        """Independent re-check of bounds, integrality and every row."""
        out = []
        for j, v in enumerate(self.variables):
            if x[j] < v.lb - tol or x[j] > v.ub + tol:
                out.append(f"bound {v.name}={x[j]:.9g} outside [{v.lb}, {v.ub}]")
            if v.integer and abs(x[j] - round(x[j])) > INT_TOL:
                out.append(f"integrality {v.name}={x[j]:.9g}")
        for r, con in enumerate(self.constraints):
            lhs = sum(a * x[j] for j, a in con.coeffs)
            bad = (
                (con.sense == "<=" and lhs > con.rhs + tol)
                or (con.sense == ">=" and lhs < con.rhs - tol)
                or (con.sense == "=" and abs(lhs - con.rhs) > tol)
            )
            if bad:
                out.append(f"row {con.name or r}: {lhs:.9g} {con.sense} {con.rhs:.9g}")
        return out

    def to_lp_text(self) -> str:
        """LP-format-like text dump for cross-checking with external tools."""

        def expr(items) -> str:
            parts = []
            for j, a in items:
                sign = "-" if a < 0 else "+"
                parts.append(f"{sign} {abs(a):.12g} {self.variables[j].name}")
            text = " ".join(parts) if parts else "0"
            return text[2:] if text.startswith("+ ") else text

        lines = [f"\\ {self.name}", "Maximize", f" obj: {expr(sorted(self.objective.items()))}", "Subject To"]
        for r, con in enumerate(self.constraints):
            lines.append(f" {con.name or f'c{r}'}: {expr(con.coeffs)} {con.sense} {con.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables:
            lines.append(f" {v.lb:.12g} <= {v.name} <= {v.ub:.12g}")
        ints = [v.name for v in self.variables if v.integer]
        if ints:
            lines.append("General")
            lines.extend(f" {name}" for name in ints)
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class MilpSolution:
    status: str  # optimal | infeasible | unbounded
    objective: float = float("nan")
    x: np.ndarray | None = None
    nodes: int = 0
    solve_time: float = 0.0
    model: MilpModel | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def value(self, name_or_index: str | int) -> float:
        if self.x is None:
            raise MilpError(f"no assignment available (status {self.status})")
        j = name_or_index if isinstance(name_or_index, int) else self.model.index(name_or_index)
        return float(self.x[j])
