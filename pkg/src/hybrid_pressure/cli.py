"""Command-line entry point: ``hybrid-pressure <command> [config] [options]``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .blue import build_blue_model, schedules_csv
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import poisson_setup, simulate, sweep
from .green import build_green_model
from .illustrative import illustrative_instance, run_illustrative
from .milp import ResourceLimitError
from .network import NetworkError, VehicleClass, build_grid, conflict_matrix_csv
from .policy import SolveLimitError
from .sim import SimulationError, run_simulation
from .stability import drift_summary, in_stability_region, stability_csv


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("rows", "cols", "horizon", "seeds", "rate_vph", "av_share", "mode", "backend", "lost_time_green",
            "output_dir", "workers", "boundary_fraction", "poisson_periods", "max_periods")
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "full_scale", False):
        out["full_scale"] = True
    return out


def _config(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config, _overrides(args))


def _movement_label(spec, key) -> str:
    return f"{spec.label(key[0])}:{spec.label(key[1])}"


def cmd_illustrative(args: argparse.Namespace) -> dict:
    start = time.perf_counter()
    res = run_illustrative(backend=args.backend or "highs")
    spec = res.spec
    _, _, weights, _, _, av_weights = illustrative_instance()
    lines = [f"green objective: {res.green.objective:.6f}", f"blue objective:  {res.blue.objective:.6f}", ""]
    for name, out, w in (("green", res.green, weights), ("blue", res.blue, av_weights)):
        lines.append(f"{name} movements (a, b)")
        for key in sorted(out.a, key=lambda k: _movement_label(spec, k)):
            if out.a[key] > 0 or out.b.get(key, 0):
                lines.append(f"  {_movement_label(spec, key):8s} a={out.a[key]:.4f} b={out.b.get(key, 0)}")
        lines.append(f"{name} lanes (rate, weighted rate)")
        for lane, rate in sorted(out.lane_rates.items(), key=lambda kv: spec.label(kv[0])):
            lines.append(f"  {spec.label(lane):4s} {rate:8.4f} {w.get(lane, 0.0) * rate:8.4f}")
        lines.append("")
    print("\n".join(lines))
    return {"green_objective": res.green.objective, "blue_objective": res.blue.objective,
            "seconds": time.perf_counter() - start}


def cmd_simulate(args: argparse.Namespace) -> dict:
    return simulate(_config(args))


def cmd_sweep(args: argparse.Namespace) -> dict:
    return sweep(_config(args))


def cmd_check_stability(args: argparse.Namespace) -> dict:
    cfg = _config(args)
    seed = cfg.seeds[0]
    network, p, demand, alpha = poisson_setup(cfg, seed)
    d = demand.source_rates()
    report = in_stability_region(d, p, network)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "stability.csv").write_text(stability_csv(d, p, network))
    summary = {"boundary_rate_per_access_point": alpha, "rate_per_access_point": demand.rate,
               "inside": report.inside, "min_slack": report.min_slack}
    if args.simulate:
        result = run_simulation(network, p, mode=cfg.mode, backend=cfg.backend, max_periods=cfg.poisson_periods,
                                poisson=demand, record_queues=False)
        drift = drift_summary(result.log.total_queue)
        summary.update(q3_mean=drift.q3_mean, q4_mean=drift.q4_mean, relative_change=drift.relative_change,
                       growth=drift.growth)
    return summary


def cmd_dump_network(args: argparse.Namespace) -> dict:
    cfg = _config(args)
    network = build_grid(cfg.rows, cfg.cols, cfg.params())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for node, spec in sorted(network.intersections.items()):
        path = out / f"conflicts_{node}.csv"
        path.write_text(conflict_matrix_csv(spec))
        written.append(path.name)
    # the worked example's two models and its blue schedule, for cross-checking
    spec, queues, weights, p, av_queues, av_weights = illustrative_instance()
    gm, _ = build_green_model(spec, queues, weights, p)
    bm, _ = build_blue_model(spec, av_queues, av_weights, 0.0, cfg.params().dt, cfg.params(), compact=False)
    (out / "illustrative_green.lp").write_text(gm.to_lp_text())
    (out / "illustrative_blue.lp").write_text(bm.to_lp_text())
    (out / "illustrative_blue_schedule.csv").write_text(schedules_csv(run_illustrative().blue.schedules))
    _, sp, demand, _ = poisson_setup(cfg, cfg.seeds[0])
    (out / "stability.csv").write_text(stability_csv(demand.source_rates(), sp, network))
    written += ["illustrative_green.lp", "illustrative_blue.lp", "illustrative_blue_schedule.csv", "stability.csv"]
    return {"output_dir": str(out), "files": written,
            "lanes": len(network.lanes), "av_lanes": sum(l.cls is VehicleClass.AV for l in network.lanes.values())}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybrid-pressure", description="Hybrid green/blue max-pressure control")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", nargs="?", help="YAML experiment config")
        p.add_argument("--rows", type=int)
        p.add_argument("--cols", type=int)
        p.add_argument("--horizon", type=float)
        p.add_argument("--seeds", type=int, nargs="+")
        p.add_argument("--rate-vph", type=float, dest="rate_vph")
        p.add_argument("--av-share", type=float, dest="av_share")
        p.add_argument("--mode", choices=["hybrid", "pure-green", "pure-blue", "2xgreen"])
        p.add_argument("--lost-time", type=float, dest="lost_time_green")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--workers", type=int)
        p.add_argument("--max-periods", type=int, dest="max_periods")
        p.add_argument("--full-scale", action="store_true", dest="full_scale",
                       help="5x5 grid, 30 min horizon, 40 seeds")
        p.add_argument("--backend", choices=["highs", "native"])

    p = sub.add_parser("illustrative", help="solve the single-intersection worked example")
    p.add_argument("--backend", choices=["highs", "native"])
    p.set_defaults(func=cmd_illustrative)
    for name, func, text in (("simulate", cmd_simulate, "run one scenario over all seeds"),
                             ("sweep", cmd_sweep, "AV share x rate x lost time sweep against 2xGreen"),
                             ("dump-network", cmd_dump_network, "write conflict matrices and debug models")):
        p = sub.add_parser(name, help=text)
        common(p)
        p.set_defaults(func=func)
    p = sub.add_parser("check-stability", help="lane flows against service rates, optionally simulated")
    common(p)
    p.add_argument("--boundary-fraction", type=float, dest="boundary_fraction")
    p.add_argument("--poisson-periods", type=int, dest="poisson_periods")
    p.add_argument("--simulate", action="store_true")
    p.set_defaults(func=cmd_check_stability)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except (ConfigError, NetworkError) as exc:
        return _fail("config", exc, 2)
    except (SolveLimitError, ResourceLimitError) as exc:
        return _fail("solver", exc, 3)
    except SimulationError as exc:
        return _fail("simulation", exc, 4)
    except (OSError, ValueError) as exc:
        return _fail("input", exc, 2)
    json.dump(result, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")
    return 0


def _fail(kind: str, exc: Exception, code: int) -> int:
    json.dump({"error": kind, "type": type(exc).__name__, "message": str(exc)}, sys.stderr)
    sys.stderr.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
