import csv
import subprocess
import sys

import pytest

from slicesim.cli import main

SMALL_TOML = """
horizon_sadis = 48
train_sadis = 36
clusters = 3

[traffic]
n_tiles = 9
n_days = 2
spatial_groups = 3
"""


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL_TOML)
    return str(p)


def test_gen_traffic_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen-traffic", "--seed", "7", "--out", str(a), "--n-days", "1"]) == 0
    assert main(["gen-traffic", "--seed", "7", "--out", str(b), "--n-days", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["gen-traffic", "--seed", "8", "--out", str(b), "--n-days", "1"]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_cluster_cardinality(tmp_path):
    traces = tmp_path / "t.csv"
    assert main(["gen-traffic", "--seed", "1", "--out", str(traces), "--n-tiles", "100", "--n-days", "1"]) == 0
    out = tmp_path / "cl"
    assert main(["cluster", "--traces", str(traces), "--k", "10", "--out", str(out)]) == 0
    with open(out / "clusters.csv") as fh:
        labels = {int(r["cluster_id"]) for r in csv.DictReader(fh)}
    assert labels == set(range(10))
    with open(out / "bs_traces.csv") as fh:
        assert len({r["tile_id"] for r in csv.DictReader(fh)}) == 10


def test_simulate_and_report(tmp_path, small_config):
    run_a, run_b = tmp_path / "runA", tmp_path / "runB"
    assert main(["simulate", "--config", small_config, "--out", str(run_a)]) == 0
    assert main(["simulate", "--config", small_config, "--seed", "3", "--out", str(run_b)]) == 0
    rep = tmp_path / "rep"
    assert main(["report", str(run_a), str(run_b), "--out", str(rep)]) == 0
    with open(rep / "comparison.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["run"] for r in rows} == {"runA", "runB"}
    assert {"energy_improvement_pct", "mean_qos"} <= set(rows[0])
    assert (rep / "beta_sweep.png").stat().st_size > 0
    assert (rep / "reward_regret_runA.png").exists()


def test_simulate_deterministic(tmp_path, small_config):
    for name in ("x", "y"):
        assert main(["simulate", "--config", small_config, "--seed", "11", "--out", str(tmp_path / name)]) == 0
    for agent in ("allactive", "random", "dcmab", "thompson"):
        f = f"history_{agent}.csv"
        assert (tmp_path / "x" / f).read_bytes() == (tmp_path / "y" / f).read_bytes()


def test_validation_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("beta = -1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "r")]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 2
    malformed = tmp_path / "m.csv"
    malformed.write_text("tile_id,service,t_index,demand_mbps\na,b,0,-3\n")
    assert main(["cluster", "--traces", str(malformed), "--k", "1", "--out", str(tmp_path / "c")]) == 2


def test_report_on_unfinished_run(tmp_path):
    (tmp_path / "half").mkdir()
    assert main(["report", str(tmp_path / "half"), "--out", str(tmp_path / "rep")]) == 2


def test_runtime_failure_exit_code(tmp_path, small_config):
    run = tmp_path / "run"
    assert main(["simulate", "--config", small_config, "--out", str(run)]) == 0
    (run / "summary.json").write_text("{ broken")
    assert main(["report", str(run), "--out", str(tmp_path / "rep"), "--no-figures"]) == 1


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--no-such-flag"])
    assert exc.value.code != 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "slicesim", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "gen-traffic" in res.stdout
