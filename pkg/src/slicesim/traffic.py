"""Per-tile, per-service demand traces: CSV ingestion, synthetic generation, resampling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

CSV_COLUMNS = ("tile_id", "service", "t_index", "demand_mbps")


class TraceParseError(ValueError):
    """A row of a trace file could not be parsed."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class TraceIntegrityError(ValueError):
    """The trace file is well-formed row by row but inconsistent as a whole."""


@dataclass(frozen=True)
class ServiceId:
    index: int
    name: str


@dataclass(frozen=True, eq=False)
class TraceSet:
    """Dense demand cube ``demand[tile, service, tick]`` in Mbps (mean rate per tick).

    The array is made read-only on construction so one instance can be shared
    between simulations.
    """

    tick_seconds: float
    tiles: tuple[str, ...]
    services: tuple[ServiceId, ...]
    demand: np.ndarray

    def __post_init__(self) -> None:
        demand = np.array(self.demand, dtype=np.float64)
        if self.tick_seconds <= 0:
            raise ValueError("tick_seconds must be positive")
        if not self.services:
            raise ValueError("at least one service is required")
        if demand.ndim != 3 or demand.shape[:2] != (len(self.tiles), len(self.services)):
            raise ValueError(
                f"demand shape {demand.shape} does not match "
                f"{len(self.tiles)} tiles x {len(self.services)} services"
            )
        if not np.all(np.isfinite(demand)) or np.any(demand < 0):
            raise ValueError("demand must be finite and non-negative")
        if len({s.index for s in self.services}) != len(self.services):
            raise ValueError("service indices must be unique")
        demand.setflags(write=False)
        object.__setattr__(self, "tiles", tuple(self.tiles))
        object.__setattr__(self, "services", tuple(self.services))
        object.__setattr__(self, "demand", demand)

    @property
    def n_ticks(self) -> int:
        return self.demand.shape[2]

    @property
    def service_names(self) -> list[str]:
        return [s.name for s in self.services]

    def service_position(self, name: str) -> int:
        for pos, s in enumerate(self.services):
            if s.name == name:
                return pos
        raise KeyError(name)

    def equals(self, other: TraceSet) -> bool:
        return (
            self.tick_seconds == other.tick_seconds
            and self.tiles == other.tiles
            and self.services == other.services
            and np.array_equal(self.demand, other.demand)
        )


def load_traces(
    path: str | Path,
    tick_seconds: float,
    schema: Mapping[str, str] | None = None,
) -> TraceSet:
    """Read a long-format trace CSV into a dense :class:`TraceSet`.

    ``schema`` maps the canonical column names (``tile_id``, ``service``,
    ``t_index``, ``demand_mbps``) to the header names used in the file.
    Tiles and services are indexed in order of first appearance; cells
    absent from the file are zero.
    """
    cols = {c: c for c in CSV_COLUMNS}
    if schema:
        cols.update(schema)

    cells: dict[tuple[str, str, int], float] = {}
    tiles: dict[str, None] = {}
    services: dict[str, None] = {}
    max_t = -1
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise TraceParseError(1, "missing header")
        missing = [cols[c] for c in CSV_COLUMNS if cols[c] not in reader.fieldnames]
        if missing:
            raise TraceParseError(1, f"header lacks column(s) {missing}")
        for row in reader:
            line = reader.line_num
            tile = (row[cols["tile_id"]] or "").strip()
            service = (row[cols["service"]] or "").strip()
            if not tile or not service:
                raise TraceParseError(line, "empty tile_id or service")
            try:
                t = int(row[cols["t_index"]])
            except (TypeError, ValueError):
                raise TraceParseError(line, f"non-integer t_index {row[cols['t_index']]!r}") from None
            if t < 0:
                raise TraceParseError(line, f"negative t_index {t}")
            try:
                value = float(row[cols["demand_mbps"]])
            except (TypeError, ValueError):
                raise TraceParseError(
                    line, f"non-numeric demand {row[cols['demand_mbps']]!r}"
                ) from None
            if not math.isfinite(value) or value < 0:
                raise TraceParseError(line, f"demand must be finite and >= 0, got {value!r}")
            key = (tile, service, t)
            if key in cells:
                raise TraceIntegrityError(f"duplicate cell {key} at line {line}")
            cells[key] = value
            tiles.setdefault(tile)
            services.setdefault(service)
            max_t = max(max_t, t)

    if not cells:
        raise TraceIntegrityError(f"{path}: no data rows")
    tile_pos = {name: i for i, name in enumerate(tiles)}
    svc_pos = {name: i for i, name in enumerate(services)}
    demand = np.zeros((len(tiles), len(services), max_t + 1))
    for (tile, service, t), value in cells.items():
        demand[tile_pos[tile], svc_pos[service], t] = value
    return TraceSet(
        tick_seconds=float(tick_seconds),
        tiles=tuple(tiles),
        services=tuple(ServiceId(i, name) for i, name in enumerate(services)),
        demand=demand,
    )


def save_traces(ts: TraceSet, path: str | Path) -> None:
    """Write every cell (zeros included) so that :func:`load_traces` inverts this exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i, tile in enumerate(ts.tiles):
            for j, svc in enumerate(ts.services):
                for t in range(ts.n_ticks):
                    writer.writerow((tile, svc.name, t, repr(float(ts.demand[i, j, t]))))


@dataclass(frozen=True)
class ServiceProfile:
    name: str
    base_mbps: float
    peak_mbps: float
    peak_hour: float
    noise_std_mbps: float = 0.0

    def __post_init__(self) -> None:
        if not (self.peak_mbps >= self.base_mbps >= 0):
            raise ValueError(f"{self.name}: need peak_mbps >= base_mbps >= 0")
        if not 0 <= self.peak_hour <= 24:
            raise ValueError(f"{self.name}: peak_hour must be within [0, 24]")
        if self.noise_std_mbps < 0:
            raise ValueError(f"{self.name}: noise_std_mbps must be >= 0")


@dataclass(frozen=True)
class SyntheticConfig:
    services: tuple[ServiceProfile, ...]
    n_tiles: int = 40
    n_days: int = 10
    tick_seconds: float = 900.0
    spatial_groups: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "services", tuple(self.services))
        if not self.services:
            raise ValueError("at least one service profile is required")
        if len({s.name for s in self.services}) != len(self.services):
            raise ValueError("service names must be unique")
        if not self.n_tiles >= self.spatial_groups >= 1:
            raise ValueError("need n_tiles >= spatial_groups >= 1")
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")
        if self.tick_seconds <= 0 or 86400 % self.tick_seconds:
            raise ValueError("tick_seconds must be a positive divisor of one day")


def group_gains(cfg: SyntheticConfig) -> np.ndarray:
    """The ``(spatial_groups, n_services)`` gain table :func:`generate_synthetic` draws first from the seed."""
    return np.random.default_rng(cfg.seed).uniform(0.5, 1.5, size=(cfg.spatial_groups, len(cfg.services)))


def group_of_tile(tile: int, n_tiles: int, spatial_groups: int) -> int:
    return tile * spatial_groups // n_tiles


def hour_of_day(t: np.ndarray | int, tick_seconds: float) -> np.ndarray:
    return (np.asarray(t, dtype=np.float64) * tick_seconds / 3600.0) % 24.0


def generate_synthetic(cfg: SyntheticConfig) -> TraceSet:
    """Diurnal demand: a raised half-sine around each service's peak hour, scaled per spatial group.

    Tiles are split into ``spatial_groups`` contiguous blocks; every block
    draws, per service, a gain in [0.5, 1.5] that multiplies the above-base
    part of that service's profile. Groups therefore differ in service mix
    and hence in the timing of their total load. Gaussian noise is added per
    cell and the result is clamped at 0.
    """
    rng = np.random.default_rng(cfg.seed)
    gains = rng.uniform(0.5, 1.5, size=(cfg.spatial_groups, len(cfg.services)))
    n_ticks = int(round(cfg.n_days * 86400 / cfg.tick_seconds))
    hours = hour_of_day(np.arange(n_ticks), cfg.tick_seconds)
    tile_gain = gains[[group_of_tile(i, cfg.n_tiles, cfg.spatial_groups) for i in range(cfg.n_tiles)]]

    demand = np.empty((cfg.n_tiles, len(cfg.services), n_ticks))
    for j, svc in enumerate(cfg.services):
        shape = np.maximum(0.0, np.sin(np.pi * (hours - svc.peak_hour + 6.0) / 12.0))
        demand[:, j, :] = svc.base_mbps + (svc.peak_mbps - svc.base_mbps) * shape[None, :] * tile_gain[:, j, None]
    noise = rng.normal(0.0, 1.0, size=demand.shape)
    for j, svc in enumerate(cfg.services):
        demand[:, j, :] += svc.noise_std_mbps * noise[:, j, :]
    np.maximum(demand, 0.0, out=demand)

    return TraceSet(
        tick_seconds=float(cfg.tick_seconds),
        tiles=tuple(f"tile{i:03d}" for i in range(cfg.n_tiles)),
        services=tuple(ServiceId(j, s.name) for j, s in enumerate(cfg.services)),
        demand=demand,
    )


def resample(ts: TraceSet, sadi_seconds: float) -> TraceSet:
    """Average consecutive ticks into windows of ``sadi_seconds``; a trailing partial window is dropped."""
    ratio = sadi_seconds / ts.tick_seconds
    factor = int(round(ratio))
    if factor < 1 or not math.isclose(ratio, factor, rel_tol=0, abs_tol=1e-9):
        raise ValueError(
            f"SADI of {sadi_seconds}s is not an integer multiple of the {ts.tick_seconds}s tick"
        )
    if factor == 1:
        return TraceSet(float(sadi_seconds), ts.tiles, ts.services, ts.demand)
    n_out = ts.n_ticks // factor
    if n_out == 0:
        raise ValueError("trace is shorter than one SADI")
    covered = ts.demand[:, :, : n_out * factor]
    out = covered.reshape(len(ts.tiles), len(ts.services), n_out, factor).mean(axis=3)
    return TraceSet(float(sadi_seconds), ts.tiles, ts.services, out)


def select_services(ts: TraceSet, names: Sequence[str]) -> TraceSet:
    """Reorder/subset services by name, reindexing them 0..n-1."""
    pos = [ts.service_position(n) for n in names]
    return TraceSet(
        ts.tick_seconds,
        ts.tiles,
        tuple(ServiceId(i, n) for i, n in enumerate(names)),
        ts.demand[:, pos, :],
    )
