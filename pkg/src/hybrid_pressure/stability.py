"""Lane flows implied by mean demand, the stability region and empirical drift checks."""
from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .network import LaneKind, Network, NetworkError
from .outcome import Key

P_TOL = 1e-9


@dataclass
class FlowProfile:
    demand: dict[str, float]  # source lane -> mean arrivals per period
    flow: dict[str, float]  # non-sink lane -> mean flow per period


@dataclass
class RegionReport:
    inside: bool
    slack: dict[str, float]  # s̄_i - f_i per non-sink lane
    min_slack: float
    service: dict[str, float]


def _check_p(p: Mapping[Key, float], network: Network) -> None:
    for key, value in p.items():
        if key not in network.movements:
            raise NetworkError(f"turning proportion for {key[0]}->{key[1]}, which is not a movement")
        if value < -P_TOL or value > 1 + P_TOL:
            raise NetworkError(f"turning proportion {key[0]}->{key[1]} = {value} outside [0, 1]")
    for lane, succ in network.successors.items():
        if not succ:
            continue
        total = sum(p.get(m.key, 0.0) for m in succ)
        if abs(total - 1.0) > 1e-6 and total > P_TOL:
            raise NetworkError(f"turning proportions out of {lane} sum to {total}")


def lane_flow_rates(d: Mapping[str, float], p: Mapping[Key, float], network: Network) -> FlowProfile:
    """Solve f = d + P^T f over the source and internal lanes."""
    _check_p(p, network)
    for lane, rate in d.items():
        if lane not in network.lanes or network.lanes[lane].kind is not LaneKind.SOURCE:
            raise NetworkError(f"demand on {lane}, which is not a source lane")
        if rate < 0:
            raise NetworkError(f"negative demand on {lane}")
    lanes = [l for l, lane in network.lanes.items() if lane.kind is not LaneKind.SINK]
    index = {l: k for k, l in enumerate(lanes)}
    n = len(lanes)
    a = np.eye(n)
    for (i, j), pij in p.items():
        if i in index and j in index and pij:
            a[index[j], index[i]] -= pij
    rhs = np.array([float(d.get(l, 0.0)) for l in lanes])
    try:
        f = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise NetworkError("turning proportions trap flow in a cycle") from exc
    return FlowProfile({l: float(d.get(l, 0.0)) for l in network.source_lanes}, {l: float(f[index[l]]) for l in lanes})


def in_stability_region(d: Mapping[str, float], p: Mapping[Key, float], network: Network) -> RegionReport:
    """Strict interior test: every lane flow must stay below its unconditional service rate."""
    flows = lane_flow_rates(d, p, network).flow
    service = {l: network.lane_rate(l) for l in flows}
    slack = {l: service[l] - f for l, f in flows.items()}
    low = min(slack.values()) if slack else float("inf")
    return RegionReport(low > P_TOL, slack, max(low, 0.0), service)


def boundary_scale(d: Mapping[str, float], p: Mapping[Key, float], network: Network) -> float:
    """The factor alpha that puts alpha * d exactly on the region boundary."""
    flows = lane_flow_rates(d, p, network).flow
    ratios = [network.lane_rate(l) / f for l, f in flows.items() if f > P_TOL]
    if not ratios:
        return float("inf")
    return min(ratios)


def stability_csv(d: Mapping[str, float], p: Mapping[Key, float], network: Network) -> str:
    flows = lane_flow_rates(d, p, network).flow
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lane", "flow", "service_rate", "slack"])
    for lane in sorted(flows):
        s = network.lane_rate(lane)
        w.writerow([lane, f"{flows[lane]:.9f}", f"{s:.9f}", f"{s - flows[lane]:.9f}"])
    return buf.getvalue()


@dataclass
class DriftSummary:
    q3_mean: float  # mean total queue over the third quartile of the run
    q4_mean: float  # ... and over the last quartile
    early: float  # total queue a quarter of the way in
    final: float

    @property
    def relative_change(self) -> float:
        return abs(self.q4_mean - self.q3_mean) / max(self.q3_mean, 1.0)

    @property
    def growth(self) -> float:
        return self.final / max(self.early, 1.0)


def drift_summary(total_queue: Sequence[float]) -> DriftSummary:
    n = len(total_queue)
    if n < 4:
        raise ValueError("need at least four periods")
    q = n // 4
    return DriftSummary(
        statistics.fmean(total_queue[2 * q:3 * q]),
        statistics.fmean(total_queue[3 * q:]),
        float(total_queue[q - 1]),
        float(total_queue[-1]),
    )
