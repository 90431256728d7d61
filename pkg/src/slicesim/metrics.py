"""Run histories, regret against the per-step oracle, and comparison summaries."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

HISTORY_COLUMNS = (
    "bs_id",
    "t",
    "action_mask",
    "reward",
    "oracle_reward",
    "energy_wh",
    "e_norm",
    "qos",
    "n_users",
    "n_migrated",
)


@dataclass(frozen=True)
class HistoryRow:
    bs_id: str
    t: int
    action_mask: int
    reward: float
    oracle_reward: float
    energy_wh: float
    e_norm: float
    qos: float
    n_users: int
    n_migrated: int


@dataclass
class RunHistory:
    rows: list[HistoryRow] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def bs_ids(self) -> list[str]:
        return sorted({r.bs_id for r in self.rows})

    def column(self, name: str, bs_id: str | None = None) -> np.ndarray:
        """Values of one column, ordered by ``t``; restricted to one base station if given."""
        rows = self.rows if bs_id is None else [r for r in self.rows if r.bs_id == bs_id]
        rows = sorted(rows, key=lambda r: (r.t, r.bs_id))
        return np.array([getattr(r, name) for r in rows])

    def select(self, t_from: int = 0, t_to: int | None = None) -> RunHistory:
        rows = [r for r in self.rows if r.t >= t_from and (t_to is None or r.t < t_to)]
        return RunHistory(rows, dict(self.meta))


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_history(h: RunHistory, path: str | Path) -> None:
    rows = sorted(h.rows, key=lambda r: (r.bs_id, r.t))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in astuple(r)])


def load_history(path: str | Path, meta: dict[str, Any] | None = None) -> RunHistory:
    casts = {f.name: f.type for f in fields(HistoryRow)}
    conv = {"str": str, "int": int, "float": float}
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(HISTORY_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: history lacks columns {sorted(missing)}")
        for rec in reader:
            rows.append(HistoryRow(**{k: conv[casts[k]](rec[k]) for k in HISTORY_COLUMNS}))
    return RunHistory(rows, dict(meta or {}))


def cumulative_regret(h: RunHistory) -> dict[str, np.ndarray]:
    """Running sum of ``oracle_reward - reward`` per base station, plus ``"aggregate"`` summed over them."""
    if not h.rows:
        raise ValueError("empty history")
    out: dict[str, np.ndarray] = {}
    for bs in h.bs_ids():
        oracle = h.column("oracle_reward", bs).astype(np.float64)
        if np.any(np.isnan(oracle)):
            raise ValueError(f"oracle rewards missing for {bs}")
        out[bs] = np.cumsum(oracle - h.column("reward", bs))
    lengths = {len(v) for v in out.values()}
    if len(lengths) != 1:
        raise ValueError("base stations have different horizons")
    out["aggregate"] = np.sum([out[bs] for bs in h.bs_ids()], axis=0)
    return out


def total_energy(h: RunHistory) -> float:
    return math.fsum(r.energy_wh for r in h.rows)


def _check_compatible(a: RunHistory, b: RunHistory) -> None:
    keys_a = sorted((r.bs_id, r.t) for r in a.rows)
    keys_b = sorted((r.bs_id, r.t) for r in b.rows)
    if keys_a != keys_b:
        raise ValueError("histories cover different base stations or horizons")


def energy_improvement(h_agent: RunHistory, h_ref: RunHistory) -> float:
    """Percent energy saved relative to the reference (negative when the agent uses more)."""
    _check_compatible(h_agent, h_ref)
    return 100.0 * (1.0 - total_energy(h_agent) / total_energy(h_ref))


def _block(h: RunHistory, ref: RunHistory) -> dict[str, float]:
    regret = math.fsum(r.oracle_reward - r.reward for r in h.rows)
    n = len(h.rows)
    qos_mean = math.fsum(r.qos for r in h.rows) / n
    ref_qos = math.fsum(r.qos for r in ref.rows) / len(ref.rows)
    return {
        "mean_reward": math.fsum(r.reward for r in h.rows) / n,
        "final_cumulative_regret": regret,
        "total_energy_wh": total_energy(h),
        "energy_improvement_pct": energy_improvement(h, ref),
        "mean_qos": qos_mean,
        "delta_qos": qos_mean - ref_qos,
        "mean_migrations": math.fsum(r.n_migrated for r in h.rows) / n,
    }


def summarize(h: RunHistory, h_ref: RunHistory) -> dict[str, Any]:
    """Headline figures per base station and over the whole run.

    QoS is averaged per SADI (unweighted by user counts).
    """
    _check_compatible(h, h_ref)
    per_bs = {}
    for bs in h.bs_ids():
        mine = RunHistory([r for r in h.rows if r.bs_id == bs])
        ref = RunHistory([r for r in h_ref.rows if r.bs_id == bs])
        per_bs[bs] = _block(mine, ref)
    return {"aggregate": _block(h, h_ref), "per_bs": per_bs}
