"""Experiment configuration read from YAML, with command-line overrides."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .network import PhysicalParams
from .policy import PolicyMode


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    rows: int = 3
    cols: int = 3
    horizon: float = 600.0  # s of departures
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    rate_vph: float = 6000.0
    av_share: float = 0.5
    mode: str = "hybrid"
    backend: str = "highs"
    lost_time_green: float = 2.0
    max_periods: int = 2000
    output_dir: str = "out"
    workers: int = 1
    # sweep axes; empty means "just the single value above"
    av_shares: list[float] = field(default_factory=list)
    rates_vph: list[float] = field(default_factory=list)
    lost_times: list[float] = field(default_factory=list)
    # Poisson runs for the stability check
    boundary_fraction: float = 0.7
    poisson_periods: int = 2000
    full_scale: bool = False

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("grid needs at least one row and one column")
        if self.horizon < 0 or self.rate_vph < 0:
            raise ConfigError("horizon and departure rate must be non-negative")
        for share in [self.av_share, *self.av_shares]:
            if not 0.0 <= share <= 1.0:
                raise ConfigError(f"AV share {share} outside [0, 1]")
        if any(r < 0 for r in self.rates_vph) or any(l < 0 or l > 10.0 for l in [self.lost_time_green, *self.lost_times]):
            raise ConfigError("rates must be non-negative and lost times within one period")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.workers < 1 or self.max_periods < 1 or self.poisson_periods < 4:
            raise ConfigError("workers, max_periods and poisson_periods must be positive (poisson_periods >= 4)")
        if self.boundary_fraction < 0:
            raise ConfigError("boundary_fraction must be non-negative")
        try:
            PolicyMode(self.mode)
        except ValueError as exc:
            raise ConfigError(f"unknown mode {self.mode!r}") from exc
        if self.backend not in ("highs", "native"):
            raise ConfigError(f"unknown backend {self.backend!r}")

    def scaled(self) -> "ExperimentConfig":
        """The full-size experiment: 5x5 grid, 30 min of departures and 40 seeds."""
        if not self.full_scale:
            return self
        return replace(self, rows=5, cols=5, horizon=1800.0, seeds=list(range(40)),
                       rates_vph=self.rates_vph or [4000.0, 5000.0, 6000.0, 7000.0, 8000.0, 9000.0, 10000.0])

    def params(self, two_x_green: bool = False, lost_time: float | None = None) -> PhysicalParams:
        lost = self.lost_time_green if lost_time is None else lost_time
        return PhysicalParams(lost_time_green=lost, two_x_green=two_x_green)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


_FIELDS = {f.name for f in fields(ExperimentConfig)}


def config_from_mapping(data: Mapping[str, Any]) -> ExperimentConfig:
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return ExperimentConfig(**dict(data))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a mapping")
        data.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return config_from_mapping(data)
