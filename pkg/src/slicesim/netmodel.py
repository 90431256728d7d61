"""Physical model of one base station: slices, user sessions, delay-based QoS and energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class PlacementError(ValueError):
    """A user was placed on a slice that is not active."""


@dataclass(frozen=True)
class ServiceClass:
    name: str
    qci: int
    delay_budget_ms: float
    per_user_rate_mbps: float

    def __post_init__(self) -> None:
        if self.delay_budget_ms <= 0:
            raise ValueError(f"{self.name}: delay_budget_ms must be > 0")
        if self.per_user_rate_mbps <= 0:
            raise ValueError(f"{self.name}: per_user_rate_mbps must be > 0")


@dataclass(frozen=True)
class SliceSpec:
    service: str | None
    capacity_mbps: float
    idle_power_w: float
    load_power_w_per_mbps: float
    base_delay_ms: float
    is_eco: bool = False

    def __post_init__(self) -> None:
        if self.capacity_mbps <= 0:
            raise ValueError("capacity_mbps must be > 0")
        if self.idle_power_w < 0 or self.load_power_w_per_mbps < 0:
            raise ValueError("powers must be >= 0")
        if self.base_delay_ms <= 0:
            raise ValueError("base_delay_ms must be > 0")
        if self.is_eco != (self.service is None):
            raise ValueError("the EcoSlice, and only it, has no service")

    @property
    def full_power_w(self) -> float:
        return self.idle_power_w + self.load_power_w_per_mbps * self.capacity_mbps


@dataclass(frozen=True)
class BaseStationModel:
    """One base station: a static draw, one slice per service, and the always-on EcoSlice.

    Slice positions ``0..S-1`` follow ``services``; position ``S`` is the EcoSlice
    wherever per-slice vectors appear.
    """

    id: str
    static_power_w: float
    services: tuple[ServiceClass, ...]
    slices: tuple[SliceSpec, ...]
    eco: SliceSpec
    sadi_hours: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "services", tuple(self.services))
        object.__setattr__(self, "slices", tuple(self.slices))
        if self.static_power_w < 0:
            raise ValueError("static_power_w must be >= 0")
        if self.sadi_hours <= 0:
            raise ValueError("sadi_hours must be > 0")
        if not self.eco.is_eco or any(s.is_eco for s in self.slices):
            raise ValueError("exactly one EcoSlice, passed as `eco`")
        if [s.service for s in self.slices] != [c.name for c in self.services]:
            raise ValueError("need exactly one slice per service, in service order")
        if self.e_max_wh_per_sadi <= 0:
            raise ValueError("maximum energy per SADI must be > 0")

    @property
    def n_slices(self) -> int:
        return len(self.slices)

    @property
    def n_configs(self) -> int:
        return 1 << len(self.slices)

    @property
    def all_specs(self) -> tuple[SliceSpec, ...]:
        return self.slices + (self.eco,)

    @property
    def e_max_wh_per_sadi(self) -> float:
        total = self.static_power_w + sum(s.full_power_w for s in self.slices) + self.eco.full_power_w
        return total * self.sadi_hours


@dataclass(frozen=True)
class UserSession:
    service: str
    demand_mbps: float
    delay_req_ms: float


def sessions_from_demand(demand_mbps: float, sc: ServiceClass) -> list[UserSession]:
    """Split an aggregate rate into ``ceil(demand / per_user_rate)`` equal sessions."""
    if demand_mbps < 0:
        raise ValueError("demand must be >= 0")
    n = math.ceil(demand_mbps / sc.per_user_rate_mbps)
    if n == 0:
        return []
    share = demand_mbps / n
    return [UserSession(sc.name, share, sc.delay_budget_ms) for _ in range(n)]


def slice_delay(offered_load_mbps: float, spec: SliceSpec) -> float:
    """Processor-sharing delay ``base / (1 - load/capacity)``; infinite at or beyond capacity."""
    if offered_load_mbps < 0:
        raise ValueError("load must be >= 0")
    if offered_load_mbps >= spec.capacity_mbps:
        return math.inf
    return spec.base_delay_ms / (1.0 - offered_load_mbps / spec.capacity_mbps)


def slice_energy_wh(offered_load_mbps: float, spec: SliceSpec, active: bool, sadi_hours: float) -> float:
    if offered_load_mbps < 0:
        raise ValueError("load must be >= 0")
    if not active:
        return 0.0
    served = min(offered_load_mbps, spec.capacity_mbps)
    return (spec.idle_power_w + spec.load_power_w_per_mbps * served) * sadi_hours


def is_active(mask: int, position: int) -> bool:
    return bool((mask >> position) & 1)


def bs_energy_wh(
    config: int,
    per_slice_loads: Sequence[float],
    bs: BaseStationModel,
    sadi_hours: float | None = None,
) -> float:
    """Static draw plus every active slice plus the EcoSlice, for one SADI.

    ``config`` is the activation bitmask over the non-Eco slices and
    ``per_slice_loads`` has one entry per slice followed by the Eco load.
    """
    hours = bs.sadi_hours if sadi_hours is None else sadi_hours
    if len(per_slice_loads) != bs.n_slices + 1:
        raise ValueError(f"expected {bs.n_slices + 1} loads (slices + Eco), got {len(per_slice_loads)}")
    total = bs.static_power_w * hours
    for pos, spec in enumerate(bs.slices):
        total += slice_energy_wh(per_slice_loads[pos], spec, is_active(config, pos), hours)
    total += slice_energy_wh(per_slice_loads[-1], bs.eco, True, hours)
    return total


def qos(
    users: Sequence[UserSession],
    placement: Sequence[int],
    loads: Sequence[float],
    specs: Sequence[SliceSpec],
    active: Sequence[bool] | None = None,
) -> float:
    """Fraction of users whose serving slice's delay meets their requirement.

    ``placement[i]`` is the slice position serving ``users[i]``; ``specs`` and
    ``loads`` are indexed by the same positions. ``active`` flags which
    positions are switched on (all of them when omitted).
    """
    if len(placement) != len(users):
        raise ValueError("placement must give one slice per user")
    if not users:
        return 1.0
    delays = [slice_delay(load, spec) for load, spec in zip(loads, specs)]
    satisfied = 0
    for user, pos in zip(users, placement):
        if active is not None and not active[pos]:
            raise PlacementError(f"user of {user.service} placed on inactive slice {pos}")
        if delays[pos] <= user.delay_req_ms:
            satisfied += 1
    return satisfied / len(users)


# Invented defaults, all overridable from the experiment config.
DEFAULT_STATIC_POWER_W = 100.0
DEFAULT_SLICE = dict(capacity_mbps=150.0, idle_power_w=20.0, load_power_w_per_mbps=0.5, base_delay_ms=20.0)
DEFAULT_ECO = dict(capacity_mbps=30.0, idle_power_w=4.0, load_power_w_per_mbps=0.25, base_delay_ms=50.0)


def default_services() -> tuple[ServiceClass, ...]:
    return (
        ServiceClass("facebook", qci=8, delay_budget_ms=300.0, per_user_rate_mbps=1.0),
        ServiceClass("netflix", qci=6, delay_budget_ms=300.0, per_user_rate_mbps=5.0),
        ServiceClass("spotify", qci=7, delay_budget_ms=100.0, per_user_rate_mbps=0.4),
    )


def default_base_station(
    bs_id: str = "bs00",
    services: Sequence[ServiceClass] | None = None,
    sadi_hours: float = 1.0,
) -> BaseStationModel:
    services = tuple(services) if services is not None else default_services()
    return BaseStationModel(
        id=bs_id,
        static_power_w=DEFAULT_STATIC_POWER_W,
        services=services,
        slices=tuple(SliceSpec(s.name, **DEFAULT_SLICE) for s in services),
        eco=SliceSpec(None, is_eco=True, **DEFAULT_ECO),
        sadi_hours=sadi_hours,
    )

