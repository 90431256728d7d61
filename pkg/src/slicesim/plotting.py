"""Figures for the ``report`` subcommand (PNG files next to the comparison table)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import RunHistory, cumulative_regret  # noqa: E402

AGENT_STYLE = {
    "allactive": dict(color="0.4", linestyle="--", label="AllActive"),
    "random": dict(color="tab:red", linestyle=":", label="Random"),
    "dcmab": dict(color="tab:blue", label="DCMAB"),
    "thompson": dict(color="tab:green", label="Thompson-C"),
}

plt.rcParams.update(
    {
        "figure.dpi": 110,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "legend.frameon": False,
        "font.size": 9,
    }
)


def _style(agent: str) -> dict:
    return AGENT_STYLE.get(agent, dict(label=agent))


def plot_reward_regret(
    histories: Mapping[str, RunHistory],
    path: str | Path,
    title: str = "",
    smooth: int = 24,
) -> Path:
    """Mean per-BS reward (moving average over ``smooth`` SADIs) and aggregate cumulative regret."""
    fig, (ax_r, ax_g) = plt.subplots(1, 2, figsize=(9, 3.4))
    for agent, h in histories.items():
        ts = np.array(sorted({r.t for r in h.rows}))
        by_t = np.zeros(len(ts))
        counts = np.zeros(len(ts))
        pos = {t: i for i, t in enumerate(ts)}
        for r in h.rows:
            by_t[pos[r.t]] += r.reward
            counts[pos[r.t]] += 1
        mean_r = by_t / counts
        k = max(1, min(smooth, len(mean_r)))
        ax_r.plot(ts[k - 1 :], np.convolve(mean_r, np.ones(k) / k, mode="valid"), **_style(agent))
        ax_g.plot(ts, cumulative_regret(h)["aggregate"], **_style(agent))
    ax_r.set_xlabel("SADI")
    ax_r.set_ylabel(f"reward ({smooth}-SADI mean)")
    ax_g.set_xlabel("SADI")
    ax_g.set_ylabel("cumulative regret (all BSs)")
    ax_g.legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_beta_sweep(rows: Sequence[Mapping], path: str | Path) -> Path:
    """Energy improvement over AllActive and mean QoS against beta, one line per agent.

    ``rows`` are comparison-table records with ``agent``, ``beta``,
    ``energy_improvement_pct`` and ``mean_qos``.
    """
    fig, (ax_e, ax_q) = plt.subplots(1, 2, figsize=(9, 3.4))
    order = list(AGENT_STYLE)
    agents = sorted({r["agent"] for r in rows}, key=lambda a: (order.index(a) if a in order else len(order), a))
    for agent in agents:
        pts = sorted((float(r["beta"]), float(r["energy_improvement_pct"]), float(r["mean_qos"]))
                     for r in rows if r["agent"] == agent)
        betas, imp, qos = (np.array(c) for c in zip(*pts))
        ax_e.plot(betas, imp, marker="o", **_style(agent))
        ax_q.plot(betas, qos, marker="o", **_style(agent))
    ax_e.set_xlabel(r"$\beta$")
    ax_e.set_ylabel("energy improvement over AllActive (%)")
    ax_q.set_xlabel(r"$\beta$")
    ax_q.set_ylabel("mean QoS")
    ax_q.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
