"""Experiment configuration: TOML in, validated dataclasses out, and back again for snapshots."""

from __future__ import annotations

import sys
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .netmodel import DEFAULT_ECO, DEFAULT_SLICE, DEFAULT_STATIC_POWER_W, BaseStationModel, ServiceClass, SliceSpec
from .traffic import ServiceProfile, SyntheticConfig


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


AGENT_NAMES = ("allactive", "random", "dcmab", "thompson")


@dataclass(frozen=True)
class ServiceConfig:
    name: str
    qci: int
    delay_budget_ms: float
    per_user_rate_mbps: float
    # per-service slice overrides; None falls back to [scenario.slice]
    capacity_mbps: float | None = None
    idle_power_w: float | None = None
    load_power_w_per_mbps: float | None = None
    base_delay_ms: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    static_power_w: float = DEFAULT_STATIC_POWER_W
    slice: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_SLICE))
    eco: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_ECO))
    services: tuple[ServiceConfig, ...] = (
        ServiceConfig("facebook", 8, 300.0, 1.0),
        ServiceConfig("netflix", 6, 300.0, 5.0),
        ServiceConfig("spotify", 7, 100.0, 0.4),
    )

    def service_classes(self) -> tuple[ServiceClass, ...]:
        return tuple(ServiceClass(s.name, s.qci, s.delay_budget_ms, s.per_user_rate_mbps) for s in self.services)

    def base_station(self, bs_id: str, sadi_hours: float) -> BaseStationModel:
        slices = []
        for s in self.services:
            spec = dict(self.slice)
            for key in DEFAULT_SLICE:
                if getattr(s, key) is not None:
                    spec[key] = getattr(s, key)
            slices.append(SliceSpec(s.name, **spec))
        return BaseStationModel(
            id=bs_id,
            static_power_w=self.static_power_w,
            services=self.service_classes(),
            slices=tuple(slices),
            eco=SliceSpec(None, is_eco=True, **self.eco),
            sadi_hours=sadi_hours,
        )


def default_profiles() -> tuple[ServiceProfile, ...]:
    return (
        ServiceProfile("facebook", base_mbps=0.2, peak_mbps=5.0, peak_hour=20.0, noise_std_mbps=0.1),
        ServiceProfile("netflix", base_mbps=0.2, peak_mbps=8.0, peak_hour=21.0, noise_std_mbps=0.1),
        ServiceProfile("spotify", base_mbps=0.1, peak_mbps=2.0, peak_hour=17.0, noise_std_mbps=0.05),
    )


@dataclass(frozen=True)
class TrafficConfig:
    source: str = "synthetic"
    path: str = ""
    tick_seconds: float = 900.0
    n_tiles: int = 40
    n_days: int = 12
    spatial_groups: int = 10
    # None: derived from the experiment seed
    seed: int | None = None
    profiles: tuple[ServiceProfile, ...] = field(default_factory=default_profiles)

    def synthetic(self, master_seed: int) -> SyntheticConfig:
        seed = self.seed if self.seed is not None else derive_seed(master_seed, "traffic")
        return SyntheticConfig(
            services=self.profiles,
            n_tiles=self.n_tiles,
            n_days=self.n_days,
            tick_seconds=self.tick_seconds,
            spatial_groups=self.spatial_groups,
            seed=seed,
        )


@dataclass(frozen=True)
class DcmabConfig:
    hidden: tuple[int, ...] = (32, 32)
    lr: float = 3e-2
    epsilon: float = 1.0
    epsilon_decay: float = 0.95
    epsilon_floor: float = 0.05
    buffer_capacity: int = 10_000
    warmup: int = 16
    batch_size: int = 64


@dataclass(frozen=True)
class ThompsonConfig:
    prior_scale: float = 0.01
    noise_scale: float = 0.25
    intercept: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 2019
    beta: float = 5.0
    sadi_seconds: float = 3600.0
    horizon_sadis: int = 288
    train_sadis: int = 240
    agents: tuple[str, ...] = ("allactive", "random", "dcmab", "thompson")
    time_features: bool = False
    clusters: int = 10
    output_dir: str = "runs/default"
    workers: int = 1
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    dcmab: DcmabConfig = field(default_factory=DcmabConfig)
    thompson: ThompsonConfig = field(default_factory=ThompsonConfig)

    @property
    def sadi_hours(self) -> float:
        return self.sadi_seconds / 3600.0

    @property
    def run_agents(self) -> tuple[str, ...]:
        """Configured agents with the AllActive reference always present, first."""
        return ("allactive",) + tuple(a for a in self.agents if a != "allactive")


def derive_seed(master: int, *keys: str | int) -> int:
    """Independent child seed per key path, so adding a consumer never shifts another's stream."""
    words = [int(master) & 0xFFFFFFFF, (int(master) >> 32) & 0xFFFFFFFF]
    for k in keys:
        words.append(zlib.crc32(k.encode()) if isinstance(k, str) else int(k))
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if not cfg.beta >= 0:
        raise ConfigError("beta must be >= 0")
    if cfg.horizon_sadis < 1:
        raise ConfigError("horizon_sadis must be >= 1")
    if not 0 <= cfg.train_sadis <= cfg.horizon_sadis:
        raise ConfigError("train_sadis must lie in [0, horizon_sadis]")
    if cfg.clusters < 1:
        raise ConfigError("clusters must be >= 1")
    if cfg.sadi_seconds <= 0:
        raise ConfigError("sadi_seconds must be > 0")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    unknown = [a for a in cfg.agents if a not in AGENT_NAMES]
    if unknown:
        raise ConfigError(f"unknown agents {unknown}; choose from {list(AGENT_NAMES)}")
    names = [s.name for s in cfg.scenario.services]
    if not names or len(set(names)) != len(names):
        raise ConfigError("scenario services must be non-empty and uniquely named")
    if len(names) > 16:
        raise ConfigError("at most 16 services (the oracle enumerates 2^S configs)")
    if cfg.traffic.source not in ("synthetic", "csv"):
        raise ConfigError("traffic.source must be 'synthetic' or 'csv'")
    if cfg.traffic.source == "csv" and not cfg.traffic.path:
        raise ConfigError("traffic.path is required for csv traffic")
    if cfg.traffic.source == "synthetic":
        missing = set(names) - {p.name for p in cfg.traffic.profiles}
        if missing:
            raise ConfigError(f"no synthetic profile for services {sorted(missing)}")
    try:
        cfg.scenario.base_station("check", cfg.sadi_hours)
        if cfg.traffic.source == "synthetic":
            cfg.traffic.synthetic(cfg.seed)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.traffic.source == "synthetic":
        ticks = cfg.traffic.n_days * 86400 / cfg.sadi_seconds
        if ticks < cfg.horizon_sadis:
            raise ConfigError(
                f"synthetic traffic spans {ticks:g} SADIs, fewer than horizon_sadis={cfg.horizon_sadis}"
            )
    return cfg


def _build(cls, data: dict[str, Any], where: str):
    known = {f for f in cls.__dataclass_fields__}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"[{where}] unknown keys {sorted(extra)}")
    return cls(**data)


def from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    raw = dict(raw)
    try:
        traffic_raw = dict(raw.pop("traffic", {}))
        if "profiles" in traffic_raw:
            traffic_raw["profiles"] = tuple(
                _build(ServiceProfile, p, "traffic.profiles") for p in traffic_raw["profiles"]
            )
        traffic = _build(TrafficConfig, traffic_raw, "traffic")

        scen_raw = dict(raw.pop("scenario", {}))
        if "services" in scen_raw:
            scen_raw["services"] = tuple(
                _build(ServiceConfig, s, "scenario.services") for s in scen_raw["services"]
            )
        for key, defaults in (("slice", DEFAULT_SLICE), ("eco", DEFAULT_ECO)):
            if key in scen_raw:
                extra = set(scen_raw[key]) - set(defaults)
                if extra:
                    raise ConfigError(f"[scenario.{key}] unknown keys {sorted(extra)}")
                scen_raw[key] = {**defaults, **scen_raw[key]}
        scenario = _build(ScenarioConfig, scen_raw, "scenario")

        dcmab_raw = dict(raw.pop("dcmab", {}))
        if "hidden" in dcmab_raw:
            dcmab_raw["hidden"] = tuple(int(h) for h in dcmab_raw["hidden"])
        dcmab = _build(DcmabConfig, dcmab_raw, "dcmab")
        thompson = _build(ThompsonConfig, dict(raw.pop("thompson", {})), "thompson")
        if "agents" in raw:
            raw["agents"] = tuple(raw["agents"])
        cfg = _build(ExperimentConfig, raw, "top level")
        cfg = replace(cfg, traffic=traffic, scenario=scenario, dcmab=dcmab, thompson=thompson)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return validate(cfg)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(raw)


def _strip_none(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_strip_none(v) for v in obj]
    return obj


def to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    return _strip_none(asdict(cfg))


def dumps(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))
