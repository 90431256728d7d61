"""Pipeline wiring: traffic -> clustering -> per-base-station simulation -> artifacts."""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import config as config_mod
from .bandit import Agent, make_agent
from .clustering import (
    ClusterAssignment,
    aggregate_clusters,
    corr_distance_matrix,
    save_assignment,
    save_merge_history,
    ward_cluster,
)
from .config import ExperimentConfig, derive_seed
from .env import all_outcomes, best_of, context_dim, reset, step_with
from .metrics import HistoryRow, RunHistory, save_history, summarize
from .netmodel import BaseStationModel
from .traffic import TraceSet, generate_synthetic, load_traces, resample, select_services

log = logging.getLogger(__name__)

DONE_FILE = "DONE"


def build_traces(cfg: ExperimentConfig) -> TraceSet:
    """Tile-level traces at SADI resolution, restricted to the scenario's services."""
    if cfg.traffic.source == "csv":
        ts = load_traces(cfg.traffic.path, cfg.traffic.tick_seconds)
    else:
        ts = generate_synthetic(cfg.traffic.synthetic(cfg.seed))
    names = [s.name for s in cfg.scenario.services]
    missing = set(names) - set(ts.service_names)
    if missing:
        raise config_mod.ConfigError(f"traces lack services {sorted(missing)}")
    ts = resample(select_services(ts, names), cfg.sadi_seconds)
    if ts.n_ticks < cfg.horizon_sadis:
        raise config_mod.ConfigError(
            f"traces cover {ts.n_ticks} SADIs, fewer than horizon_sadis={cfg.horizon_sadis}"
        )
    return ts


def cluster_tiles(ts: TraceSet, k: int) -> ClusterAssignment:
    if k > len(ts.tiles):
        raise config_mod.ConfigError(f"cannot form {k} clusters from {len(ts.tiles)} tiles")
    if len(ts.tiles) == 1:
        return ClusterAssignment({ts.tiles[0]: 0}, 1)
    return ward_cluster(corr_distance_matrix(ts), k)


def agent_params(cfg: ExperimentConfig, kind: str) -> dict[str, Any]:
    if kind == "dcmab":
        return asdict(cfg.dcmab)
    if kind == "thompson":
        return asdict(cfg.thompson)
    return {}


def simulate_bs(
    cfg: ExperimentConfig,
    bs_index: int,
    bs: BaseStationModel,
    traffic: np.ndarray,
) -> dict[str, tuple[list[HistoryRow], dict]]:
    """Run every agent on one base station over the same traffic and oracle table.

    Agents learn online for ``train_sadis`` steps and then act without
    exploration for the rest of the horizon.
    """
    horizon = cfg.horizon_sadis
    tables = [all_outcomes(bs, traffic[:, t], cfg.beta) for t in range(horizon)]
    oracle = [best_of(tab).reward for tab in tables]
    d = context_dim(cfg.time_features)

    results: dict[str, tuple[list[HistoryRow], dict]] = {}
    for kind in cfg.run_agents:
        agent: Agent = make_agent(
            kind, bs.n_configs, d, derive_seed(cfg.seed, "agent", kind, bs_index), **agent_params(cfg, kind)
        )
        obs, state = reset(bs, traffic[:, :horizon], cfg.beta, cfg.time_features)
        rows = []
        for t in range(horizon):
            if t == cfg.train_sadis:
                agent.explore = False
            arm = agent.select(obs)
            outcome = tables[t][arm]
            agent.update(obs, arm, outcome.reward)
            rows.append(
                HistoryRow(
                    bs_id=bs.id,
                    t=t,
                    action_mask=arm,
                    reward=outcome.reward,
                    oracle_reward=oracle[t],
                    energy_wh=outcome.energy_wh,
                    e_norm=outcome.e_norm,
                    qos=outcome.qos,
                    n_users=outcome.n_users,
                    n_migrated=outcome.n_migrated,
                )
            )
            obs, state = step_with(state, outcome)
        results[kind] = (rows, agent.to_dict())
    return results


def _simulate_job(args):
    return simulate_bs(*args)


@dataclass
class RunArtifacts:
    out_dir: Path
    assignment: ClusterAssignment
    histories: dict[str, RunHistory]
    summary: dict[str, Any]


def run_summary(cfg: ExperimentConfig, histories: dict[str, RunHistory]) -> dict[str, Any]:
    ref = histories["allactive"]
    phases = {"all": (0, None), "train": (0, cfg.train_sadis), "eval": (cfg.train_sadis, None)}
    agents = {}
    for kind, h in histories.items():
        agents[kind] = {}
        for phase, (lo, hi) in phases.items():
            part = h.select(lo, hi)
            if part.rows:
                agents[kind][phase] = summarize(part, ref.select(lo, hi))
    return {
        "beta": cfg.beta,
        "seed": cfg.seed,
        "horizon_sadis": cfg.horizon_sadis,
        "train_sadis": cfg.train_sadis,
        "sadi_seconds": cfg.sadi_seconds,
        "agents": agents,
    }


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunArtifacts:
    """Execute the whole pipeline and persist its artifacts; ``DONE`` is written last."""
    cfg = config_mod.validate(cfg)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / DONE_FILE).unlink(missing_ok=True)

    started = time.time()
    ts = build_traces(cfg)
    assignment = cluster_tiles(ts, cfg.clusters)
    bs_traces = aggregate_clusters(ts, assignment)
    stations = [cfg.scenario.base_station(tile, cfg.sadi_hours) for tile in bs_traces.tiles]
    jobs = [(cfg, i, bs, bs_traces.demand[i]) for i, bs in enumerate(stations)]

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_bs = list(pool.map(_simulate_job, jobs))
    else:
        per_bs = [_simulate_job(j) for j in jobs]

    histories: dict[str, RunHistory] = {}
    checkpoints: dict[str, dict[str, dict]] = {}
    for kind in cfg.run_agents:
        rows = [row for res in per_bs for row in res[kind][0]]
        histories[kind] = RunHistory(
            rows,
            {"agent": kind, "beta": cfg.beta, "seed": cfg.seed, "horizon": cfg.horizon_sadis},
        )
        checkpoints[kind] = {bs.id: res[kind][1] for bs, res in zip(stations, per_bs)}

    (out / "config.toml").write_text(config_mod.dumps(cfg))
    save_assignment(assignment, out / "clusters.csv")
    save_merge_history(assignment, out / "merges.csv")
    for kind, h in histories.items():
        save_history(h, out / f"history_{kind}.csv")
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    for kind, per_station in checkpoints.items():
        for bs_id, state in per_station.items():
            _write_json(ckpt_dir / f"{kind}_{bs_id}.json", state)
    summary = run_summary(cfg, histories)
    _write_json(out / "summary.json", summary)
    _write_json(
        out / "metadata.json",
        {"started_unix": started, "finished_unix": time.time(), "pid": os.getpid()},
    )
    (out / DONE_FILE).write_text("")
    log.info("run finished in %.1fs -> %s", time.time() - started, out)
    return RunArtifacts(out, assignment, histories, summary)
