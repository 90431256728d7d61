"""SADI-stepped slice (de)activation environment for a single base station."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .netmodel import (
    BaseStationModel,
    bs_energy_wh,
    is_active,
    qos,
    sessions_from_demand,
)

# slack for e_norm landing a few ulps above 1 at full load
_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Observation:
    e_norm: float
    qos_prev: float
    time_features: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.e_norm <= 1.0 + _NORM_TOL and 0.0 <= self.qos_prev <= 1.0):
            raise ValueError(f"observation out of bounds: {self}")

    def as_vector(self) -> np.ndarray:
        if self.time_features is None:
            return np.array([self.e_norm, self.qos_prev])
        return np.array([self.e_norm, self.qos_prev, *self.time_features])


def context_dim(time_features: bool) -> int:
    return 4 if time_features else 2


@dataclass(frozen=True)
class StepOutcome:
    config: int
    energy_wh: float
    e_norm: float
    qos: float
    reward: float
    per_slice_load_mbps: tuple[float, ...]
    n_users: int
    n_migrated: int


def reward(e_norm: float, qos: float, beta: float) -> float:
    """Linear scalarisation ``beta * qos - e_norm``, in ``[-1, beta]``."""
    if not 0.0 <= e_norm <= 1.0 + _NORM_TOL:
        raise ValueError(f"e_norm must lie in [0, 1], got {e_norm}")
    if not 0.0 <= qos <= 1.0:
        raise ValueError(f"qos must lie in [0, 1], got {qos}")
    if beta < 0 or not math.isfinite(beta):
        raise ValueError(f"beta must be finite and >= 0, got {beta}")
    return beta * qos - e_norm


def evaluate_config(
    bs: BaseStationModel,
    traffic_at_t: Sequence[float],
    config: int,
    beta: float,
) -> StepOutcome:
    """Serve one SADI of traffic under ``config``.

    Users of an active slice stay on it; all users of an inactive slice move
    to the EcoSlice.
    """
    if len(traffic_at_t) != bs.n_slices:
        raise ValueError(f"expected {bs.n_slices} service rates, got {len(traffic_at_t)}")
    if not 0 <= config < bs.n_configs:
        raise ValueError(f"config {config} outside [0, {bs.n_configs})")
    eco = bs.n_slices
    users = []
    placement = []
    loads = [0.0] * (bs.n_slices + 1)
    n_migrated = 0
    for pos, (rate, sc) in enumerate(zip(traffic_at_t, bs.services)):
        if rate < 0:
            raise ValueError("traffic rates must be >= 0")
        sessions = sessions_from_demand(float(rate), sc)
        target = pos if is_active(config, pos) else eco
        if target == eco:
            n_migrated += len(sessions)
        loads[target] += float(rate)
        users.extend(sessions)
        placement.extend([target] * len(sessions))

    active = [is_active(config, pos) for pos in range(bs.n_slices)] + [True]
    q = qos(users, placement, loads, bs.all_specs, active)
    energy = bs_energy_wh(config, loads, bs)
    e_norm = energy / bs.e_max_wh_per_sadi
    return StepOutcome(
        config=config,
        energy_wh=energy,
        e_norm=e_norm,
        qos=q,
        reward=reward(e_norm, q, beta),
        per_slice_load_mbps=tuple(loads),
        n_users=len(users),
        n_migrated=n_migrated,
    )


def all_outcomes(bs: BaseStationModel, traffic_at_t: Sequence[float], beta: float) -> list[StepOutcome]:
    return [evaluate_config(bs, traffic_at_t, c, beta) for c in range(bs.n_configs)]


def _oracle_key(o: StepOutcome) -> tuple[float, int, int]:
    # max reward, then fewer active slices, then lower mask
    return (-o.reward, bin(o.config).count("1"), o.config)


def best_of(outcomes: Sequence[StepOutcome]) -> StepOutcome:
    return min(outcomes, key=_oracle_key)


def oracle_best(bs: BaseStationModel, traffic_at_t: Sequence[float], beta: float) -> tuple[int, float]:
    if bs.n_slices > 16:
        raise ValueError("exhaustive oracle limited to 16 slices")
    best = best_of(all_outcomes(bs, traffic_at_t, beta))
    return best.config, best.reward


def hour_features(t: int, sadi_seconds: float) -> tuple[float, float]:
    angle = 2.0 * math.pi * ((t * sadi_seconds / 3600.0) % 24.0) / 24.0
    return (math.sin(angle), math.cos(angle))


@dataclass(frozen=True, eq=False)
class EnvState:
    """Immutable environment state; ``traffic`` is ``[service, sadi]`` for this base station."""

    bs: BaseStationModel
    traffic: np.ndarray
    t: int
    last_outcome: StepOutcome
    beta: float
    time_features: bool = False

    @property
    def horizon(self) -> int:
        return self.traffic.shape[1]

    @property
    def sadi_seconds(self) -> float:
        return self.bs.sadi_hours * 3600.0

    def observation(self) -> Observation:
        """Context for the decision about SADI ``t``, built from the last outcome."""
        tf = hour_features(self.t, self.sadi_seconds) if self.time_features else None
        return Observation(self.last_outcome.e_norm, self.last_outcome.qos, tf)


def reset(
    bs: BaseStationModel,
    traffic: np.ndarray,
    beta: float,
    time_features: bool = False,
) -> tuple[Observation, EnvState]:
    """Start at SADI 0 with a context bootstrapped from the all-active config at t = 0."""
    traffic = np.array(traffic, dtype=np.float64)
    if traffic.ndim != 2 or traffic.shape[0] != bs.n_slices or traffic.shape[1] < 1:
        raise ValueError(f"traffic must be [{bs.n_slices}, horizon>=1], got {traffic.shape}")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    traffic.setflags(write=False)
    boot = evaluate_config(bs, traffic[:, 0], bs.n_configs - 1, beta)
    state = EnvState(bs, traffic, 0, boot, beta, time_features)
    return state.observation(), state


def step(state: EnvState, action: int) -> tuple[Observation, float, StepOutcome, EnvState]:
    if state.t >= state.horizon:
        raise IndexError(f"cannot step past horizon {state.horizon}")
    outcome = evaluate_config(state.bs, state.traffic[:, state.t], action, state.beta)
    nxt = replace(state, t=state.t + 1, last_outcome=outcome)
    return nxt.observation(), outcome.reward, outcome, nxt


def step_with(state: EnvState, outcome: StepOutcome) -> tuple[Observation, EnvState]:
    """Advance using an outcome already evaluated for SADI ``t`` (shared oracle tables)."""
    if state.t >= state.horizon:
        raise IndexError(f"cannot step past horizon {state.horizon}")
    nxt = replace(state, t=state.t + 1, last_outcome=outcome)
    return nxt.observation(), nxt
