"""Random bounded MILPs shared by the solver tests and the acceptance run."""
import numpy as np

from hybrid_pressure.milp import MilpModel


def random_milp(rng: np.random.Generator, n_bin: int, n_cont: int, n_rows: int, n_eq: int = 0) -> MilpModel:
    model = MilpModel(name="random")
    for j in range(n_bin):
        model.add_var(f"b{j}", 0.0, 1.0, integer=True)
    for j in range(n_cont):
        model.add_var(f"x{j}", float(rng.integers(-3, 1)), float(rng.integers(1, 6)))
    n = n_bin + n_cont
    for r in range(n_rows):
        coeffs = {j: float(rng.integers(-5, 6)) for j in range(n) if rng.random() < 0.6}
        sense = "=" if r < n_eq else str(rng.choice(["<=", ">="]))
        rhs = float(rng.integers(-4, 10)) if sense != ">=" else float(rng.integers(-10, 4))
        model.add_constraint(coeffs, sense, rhs, f"r{r}")
    model.set_objective({j: float(rng.integers(-6, 7)) for j in range(n)})
    return model
