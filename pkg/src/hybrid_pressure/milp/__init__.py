"""Small mixed-integer linear programming toolkit."""
from .model import (
    CapacityError,
    MilpError,
    MilpModel,
    MilpSolution,
    ModelError,
    ResourceLimitError,
)
from .simplex import solve_lp
from .solve import enumerate_solve, solve

__all__ = [
    "CapacityError",
    "MilpError",
    "MilpModel",
    "MilpSolution",
    "ModelError",
    "ResourceLimitError",
    "enumerate_solve",
    "solve",
    "solve_lp",
]
