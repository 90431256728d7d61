"""Command line entry point: ``slicesim gen-traffic | cluster | simulate | report``.

Exit codes: 0 on success, 2 on invalid input or configuration, 1 on any
other failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .clustering import aggregate_clusters, cluster_name, save_assignment, save_merge_history
from .config import ConfigError, ExperimentConfig
from .experiment import DONE_FILE, cluster_tiles, run_experiment
from .metrics import load_history
from .traffic import TraceIntegrityError, TraceParseError, generate_synthetic, load_traces, resample, save_traces

log = logging.getLogger("slicesim")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2

REPORT_COLUMNS = (
    "run",
    "agent",
    "beta",
    "phase",
    "energy_improvement_pct",
    "mean_qos",
    "delta_qos",
    "mean_reward",
    "final_cumulative_regret",
    "total_energy_wh",
    "mean_migrations",
)


def _load_cfg(args) -> ExperimentConfig:
    cfg = config_mod.load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return config_mod.validate(cfg)


def cmd_gen_traffic(args) -> int:
    cfg = _load_cfg(args)
    traffic = cfg.traffic
    if args.seed is not None:
        traffic = replace(traffic, seed=args.seed)
    if args.n_tiles is not None:
        traffic = replace(traffic, n_tiles=args.n_tiles)
    if args.n_days is not None:
        traffic = replace(traffic, n_days=args.n_days)
    try:
        syn = traffic.synthetic(cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out or "traces.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_traces(generate_synthetic(syn), out)
    log.info("wrote %s (%d tiles, %d days, seed %d)", out, syn.n_tiles, syn.n_days, syn.seed)
    return EXIT_OK


def cmd_cluster(args) -> int:
    ts = load_traces(args.traces, args.tick_seconds)
    if args.sadi_seconds:
        ts = resample(ts, args.sadi_seconds)
    if not 1 <= args.k <= len(ts.tiles):
        raise ConfigError(f"--k must lie in [1, {len(ts.tiles)}]")
    ca = cluster_tiles(ts, args.k)
    out = Path(args.out or "clusters")
    out.mkdir(parents=True, exist_ok=True)
    save_assignment(ca, out / "clusters.csv")
    save_merge_history(ca, out / "merges.csv")
    save_traces(aggregate_clusters(ts, ca), out / "bs_traces.csv")
    sizes = ", ".join(f"{cluster_name(c)}={len(m)}" for c, m in enumerate(ca.members()))
    log.info("%d clusters: %s", ca.k, sizes)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    art = run_experiment(cfg, args.out)
    agg = {k: v["all"]["aggregate"] for k, v in art.summary["agents"].items()}
    for agent, block in agg.items():
        log.info(
            "%-9s energy %+6.2f%%  QoS %.4f  regret %.1f",
            agent,
            block["energy_improvement_pct"],
            block["mean_qos"],
            block["final_cumulative_regret"],
        )
    return EXIT_OK


def _report_rows(run_dirs: list[Path]) -> list[dict]:
    rows = []
    for run in run_dirs:
        if not (run / DONE_FILE).exists():
            raise ConfigError(f"{run} is not a completed run (no {DONE_FILE} file)")
        summary = json.loads((run / "summary.json").read_text())
        for agent, phases in summary["agents"].items():
            for phase, block in phases.items():
                agg = block["aggregate"]
                rows.append(
                    {"run": run.name, "agent": agent, "beta": summary["beta"], "phase": phase}
                    | {k: agg[k] for k in REPORT_COLUMNS[4:]}
                )
    return rows


def cmd_report(args) -> int:
    run_dirs = [Path(r) for r in args.runs]
    rows = _report_rows(run_dirs)
    out = Path(args.out or "report")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})

    if not args.no_figures:
        from .plotting import plot_beta_sweep, plot_reward_regret

        for run in run_dirs:
            summary = json.loads((run / "summary.json").read_text())
            train = summary["train_sadis"] or summary["horizon_sadis"]
            hists = {
                agent: load_history(run / f"history_{agent}.csv").select(0, train)
                for agent in summary["agents"]
            }
            plot_reward_regret(hists, out / f"reward_regret_{run.name}.png",
                               title=f"{run.name}: beta = {summary['beta']:g} (training)")
        phase = "eval" if any(r["phase"] == "eval" for r in rows) else "all"
        plot_beta_sweep([r for r in rows if r["phase"] == phase], out / "beta_sweep.png")

    _print_table([r for r in rows if r["phase"] in ("eval",)] or rows)
    return EXIT_OK


def _print_table(rows: list[dict]) -> None:
    print(f"{'run':<20} {'agent':<10} {'beta':>6} {'phase':<6} {'energy_impr_%':>13} {'mean_qos':>9}")
    for r in rows:
        print(
            f"{r['run']:<20} {r['agent']:<10} {r['beta']:>6g} {r['phase']:<6} "
            f"{r['energy_improvement_pct']:>13.2f} {r['mean_qos']:>9.4f}"
        )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (TOML)")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output file (gen-traffic) or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="slicesim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-traffic", parents=[common], help="write synthetic traces as CSV")
    p.add_argument("--n-tiles", type=int)
    p.add_argument("--n-days", type=int)
    p.set_defaults(func=cmd_gen_traffic)

    p = sub.add_parser("cluster", parents=[common], help="group tiles into base stations")
    p.add_argument("--traces", required=True, help="trace CSV (tile_id,service,t_index,demand_mbps)")
    p.add_argument("--tick-seconds", type=float, default=900.0)
    p.add_argument("--sadi-seconds", type=float, help="resample to this interval before clustering")
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("simulate", parents=[common], help="run one experiment")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="compare finished runs")
    p.add_argument("runs", nargs="+", help="run directories written by simulate")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, TraceParseError, TraceIntegrityError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.error("failed: %s", exc, exc_info=args.verbose)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
