"""Single runs, seeded sweeps and their output files."""
from __future__ import annotations

import csv
import io
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .config import ExperimentConfig
from .network import build_grid
from .policy import PolicyMode, SolveStat
from .sim import PoissonDemand, SimulationResult, generate_demand, run_simulation, turning_proportions
from .sim.metrics import mean_streak, phase_streaks
from .stability import boundary_scale

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSpec:
    rows: int
    cols: int
    horizon: float
    rate_vph: float
    av_share: float
    lost_time: float
    seed: int
    mode: str = "hybrid"
    backend: str = "highs"
    max_periods: int = 2000


@dataclass
class RunSummary:
    spec: RunSpec
    tstt: float = 0.0
    mean_tt: dict[str, float] = field(default_factory=dict)
    exited: int = 0
    unfinished: int = 0
    periods: int = 0
    streaks: dict[str, float] = field(default_factory=dict)
    solves: list[SolveStat] = field(default_factory=list)
    error: str | None = None


def run_from_spec(spec: RunSpec) -> SimulationResult:
    mode = PolicyMode(spec.mode)
    cfg = ExperimentConfig(lost_time_green=spec.lost_time)
    network = build_grid(spec.rows, spec.cols, cfg.params(two_x_green=mode is PolicyMode.TWO_X_GREEN))
    vehicles, p = generate_demand(network, spec.rate_vph, spec.horizon, spec.av_share, spec.seed)
    return run_simulation(network, p, vehicles, mode, spec.backend, spec.max_periods)


def summarize(spec: RunSpec, result: SimulationResult) -> RunSummary:
    streaks = phase_streaks(result.log.history)
    return RunSummary(spec, result.log.tstt, dict(result.log.mean_tt), result.log.exited, result.log.unfinished,
                      result.periods, {c: mean_streak(h) for c, h in streaks.items()}, list(result.log.solves))


def _run_summary(spec: RunSpec) -> RunSummary:
    try:
        return summarize(spec, run_from_spec(spec))
    except Exception as exc:  # a failed cell must not stop the sweep
        log.error("run %s failed: %s", spec, exc)
        return RunSummary(spec, error=f"{type(exc).__name__}: {exc}")


def run_many(specs: Iterable[RunSpec], workers: int = 1) -> list[RunSummary]:
    specs = list(specs)
    if workers <= 1 or len(specs) <= 1:
        return [_run_summary(s) for s in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_summary, specs))


def config_runs(cfg: ExperimentConfig, mode: str | None = None, av_share: float | None = None,
                rate: float | None = None, lost: float | None = None) -> list[RunSpec]:
    return [
        RunSpec(cfg.rows, cfg.cols, cfg.horizon, cfg.rate_vph if rate is None else rate,
                cfg.av_share if av_share is None else av_share,
                cfg.lost_time_green if lost is None else lost, seed, mode or cfg.mode, cfg.backend, cfg.max_periods)
        for seed in cfg.seeds
    ]


def _mean_std(xs: list[float]) -> tuple[float, float]:
    if not xs:
        return float("nan"), float("nan")
    return statistics.fmean(xs), statistics.stdev(xs) if len(xs) > 1 else 0.0


SUMMARY_HEADER = ["mode", "av_share", "rate_vph", "lost_time", "runs", "failed", "tstt_mean", "tstt_std",
                  "tt_av_mean", "tt_lv_mean", "tt_all_mean", "tt_all_std", "unfinished", "benchmark_tstt_mean",
                  "tstt_ratio", "blue_streak_mean", "green_streak_mean"]


def summary_row(runs: list[RunSummary], benchmark: list[RunSummary] | None = None) -> list[str]:
    spec = runs[0].spec
    ok = [r for r in runs if r.error is None]
    tstt_m, tstt_s = _mean_std([r.tstt for r in ok])
    all_m, all_s = _mean_std([r.mean_tt.get("all", 0.0) for r in ok])
    av_m, _ = _mean_std([r.mean_tt.get("AV", 0.0) for r in ok])
    lv_m, _ = _mean_std([r.mean_tt.get("LV", 0.0) for r in ok])
    bench = [r.tstt for r in (benchmark or []) if r.error is None]
    bench_m = statistics.fmean(bench) if bench else float("nan")
    ratio = tstt_m / bench_m if bench and bench_m > 0 else float("nan")
    blue_m, _ = _mean_std([r.streaks.get("blue", 0.0) for r in ok])
    green_m, _ = _mean_std([r.streaks.get("green", 0.0) for r in ok])
    return [spec.mode, f"{spec.av_share:.2f}", f"{spec.rate_vph:.1f}", f"{spec.lost_time:.1f}", str(len(runs)),
            str(len(runs) - len(ok)), f"{tstt_m:.6f}", f"{tstt_s:.6f}", f"{av_m:.6f}", f"{lv_m:.6f}", f"{all_m:.6f}",
            f"{all_s:.6f}", str(sum(r.unfinished for r in ok)), f"{bench_m:.6f}", f"{ratio:.6f}",
            f"{blue_m:.6f}", f"{green_m:.6f}"]


def csv_text(header: list[str], rows: Iterable[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def solver_stats(runs: Iterable[RunSummary]) -> dict:
    """Solve counts, node counts and wall times per colour; kept out of the CSVs since timing varies."""
    out: dict = {}
    for color in ("green", "blue"):
        stats = [s for r in runs for s in r.solves if s.color == color]
        secs = [s.seconds for s in stats]
        nodes = [s.nodes for s in stats]
        out[color] = {
            "solves": len(stats),
            "mean_seconds": statistics.fmean(secs) if secs else 0.0,
            "max_seconds": max(secs, default=0.0),
            "mean_nodes": statistics.fmean(nodes) if nodes else 0.0,
            "max_nodes": max(nodes, default=0),
        }
    return out


def write_run_outputs(result: SimulationResult, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "vehicles.csv").write_text(result.log.vehicles_csv())
    (outdir / "queues.csv").write_text(result.log.queues_csv())
    (outdir / "phases.csv").write_text(result.log.phases_csv())


def simulate(cfg: ExperimentConfig) -> dict:
    """Run every seed of the configured scenario and write per-seed and summary files."""
    cfg = cfg.scaled()
    out = Path(cfg.output_dir)
    runs = []
    for spec in config_runs(cfg):
        result = run_from_spec(spec)
        write_run_outputs(result, out / f"seed_{spec.seed}")
        runs.append(summarize(spec, result))
    (out / "summary.csv").write_text(csv_text(SUMMARY_HEADER, [summary_row(runs)]))
    stats = solver_stats(runs)
    (out / "solver_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return {"output_dir": str(out), "runs": len(runs), "tstt_mean": statistics.fmean(r.tstt for r in runs),
            "solver": stats}


def sweep(cfg: ExperimentConfig) -> dict:
    """AV share x departure rate x lost time, each cell normalised by the 2xGreen benchmark."""
    cfg = cfg.scaled()
    shares = cfg.av_shares or [cfg.av_share]
    rates = cfg.rates_vph or [cfg.rate_vph]
    losts = cfg.lost_times or [cfg.lost_time_green]
    cells = [(a, r, l) for r in rates for l in losts for a in shares]
    specs: list[RunSpec] = []
    for r in rates:
        for l in losts:
            # the benchmark routes everyone on LV lanes, so the AV share only relabels vehicles
            specs.extend(config_runs(cfg, mode=PolicyMode.TWO_X_GREEN.value, av_share=0.0, rate=r, lost=l))
    for a, r, l in cells:
        specs.extend(config_runs(cfg, av_share=a, rate=r, lost=l))
    results = run_many(specs, cfg.workers)
    n = len(cfg.seeds)
    bench = {}
    k = 0
    for r in rates:
        for l in losts:
            bench[(r, l)] = results[k:k + n]
            k += n
    rows = [summary_row(bench[(r, l)]) for r in rates for l in losts]
    for a, r, l in cells:
        rows.append(summary_row(results[k:k + n], bench[(r, l)]))
        k += n
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(csv_text(SUMMARY_HEADER, rows))
    stats = solver_stats(results)
    (out / "solver_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    failed = [r.error for r in results if r.error]
    return {"output_dir": str(out), "cells": len(cells), "runs": len(results), "failed": len(failed), "solver": stats}


def poisson_setup(cfg: ExperimentConfig, seed: int, fraction: float | None = None):
    """Network, p and a Poisson source scaled to a fraction of the region boundary."""
    network = build_grid(cfg.rows, cfg.cols, cfg.params())
    unit = PoissonDemand(network, 1.0, cfg.av_share, seed)
    p = turning_proportions(network, unit.expected_transitions())
    alpha = boundary_scale(unit.source_rates(), p, network)
    frac = cfg.boundary_fraction if fraction is None else fraction
    return network, p, PoissonDemand(network, frac * alpha, cfg.av_share, seed), alpha
