from .demand import PoissonDemand, Vehicle, build_route, generate_demand, node_path, turning_proportions
from .engine import NetworkState, SimulationError, SimulationResult, apply_service, run_simulation
from .metrics import MetricsLog, mean_streak, phase_streaks

__all__ = [
    "MetricsLog",
    "NetworkState",
    "PoissonDemand",
    "SimulationError",
    "SimulationResult",
    "Vehicle",
    "apply_service",
    "build_route",
    "generate_demand",
    "mean_streak",
    "node_path",
    "phase_streaks",
    "run_simulation",
    "turning_proportions",
]
