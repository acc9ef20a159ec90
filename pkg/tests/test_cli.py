"""End-to-end command-line contract, exercised by spawning the binary."""

import csv
import json
import re
import shutil
import subprocess
import sys

import pytest

EDGEFORM = shutil.which("edgeform")

pytestmark = pytest.mark.skipif(EDGEFORM is None,
                                reason="edgeform entry point not installed")

# keep spawned runs cheap: a short horizon still exercises the full pipeline
SHORT = ["--override", "sim.horizon=0.5"]


def run_cli(*args, **kwargs):
    return subprocess.run([EDGEFORM, *args], capture_output=True, text=True,
                          **kwargs)


def expected_header(num_agents: int, num_edges: int) -> list[str]:
    cols = ["t"]
    for i in range(1, num_agents + 1):
        cols += [f"agent{i}_x", f"agent{i}_y", f"agent{i}_vx", f"agent{i}_vy"]
    for k in range(1, num_edges + 1):
        cols += [f"edge{k}_ex", f"edge{k}_ey"]
    cols += ["bound_lo_x", "bound_hi_x", "bound_lo_y", "bound_hi_y"]
    for k in range(1, num_edges + 1):
        cols += [f"edge{k}_sx", f"edge{k}_sy"]
    for i in range(1, num_agents + 1):
        cols += [f"u{i}_x", f"u{i}_y"]
    for i in range(1, num_agents + 1):
        cols += [f"thetahat{i}_1", f"thetahat{i}_2"]
    cols += ["V", "c1dp"]
    return cols


class TestRunCommand:
    def test_successful_run_exit_zero(self, tmp_path):
        res = run_cli("run", "fig2a_spanning_tree", "--out", str(tmp_path),
                      *SHORT)
        assert res.returncode == 0, res.stderr
        assert "ok" in res.stdout
        assert (tmp_path / "fig2a_spanning_tree.csv").exists()
        assert (tmp_path / "fig2a_spanning_tree_metrics.json").exists()

    def test_csv_schema_tree(self, tmp_path):
        run_cli("run", "fig2a_spanning_tree", "--out", str(tmp_path), *SHORT)
        with (tmp_path / "fig2a_spanning_tree.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == expected_header(5, 4)
        assert len(rows[0]) == 63
        # horizon 0.5 at dt=1e-3 stride 10: samples at steps 0,10,...,500
        assert len(rows) == 52
        for row in rows[1:]:
            assert len(row) == 63

    def test_csv_schema_cycle(self, tmp_path):
        run_cli("run", "fig2b_cycle", "--out", str(tmp_path), *SHORT)
        with (tmp_path / "fig2b_cycle.csv").open() as fh:
            header = fh.readline().strip().split(",")
        assert header == expected_header(5, 5)
        assert len(header) == 67

    def test_csv_number_format(self, tmp_path):
        run_cli("run", "fig2a_spanning_tree", "--out", str(tmp_path), *SHORT)
        with (tmp_path / "fig2a_spanning_tree.csv").open() as fh:
            fh.readline()
            cells = fh.readline().strip().split(",")
        num = re.compile(r"^-?(inf|\d+(\.\d+)?([eE][+-]?\d+)?)$")
        for cell in cells:
            assert num.match(cell), cell
            if "inf" not in cell:
                digits = re.sub(r"[-+.eE]", "", cell).lstrip("0")
                assert len(digits) <= 9

    def test_metrics_json(self, tmp_path):
        run_cli("run", "fig3_global", "--out", str(tmp_path), *SHORT)
        data = json.loads((tmp_path / "fig3_global_metrics.json").read_text())
        assert data["completed"] is True
        assert data["violation_count"] == 0
        assert set(data) == {"max_final_error", "violation_count",
                             "settling_time", "sup_theta_hat", "completed"}

    def test_initial_violation_exit_two(self, tmp_path):
        res = run_cli("run", "fig2a_spanning_tree", "--out", str(tmp_path),
                      "--override",
                      "plant.initial_positions=[[50,50],[0.6,2.3],[-0.8,2.1],"
                      "[-1.4,0.5],[-0.2,0.35]]")
        assert res.returncode == 2
        assert "initial constraint violated" in res.stderr
        # header-only CSV plus a metrics stub naming the violations
        with (tmp_path / "fig2a_spanning_tree.csv").open() as fh:
            lines = fh.read().splitlines()
        assert len(lines) == 1
        assert lines[0].split(",") == expected_header(5, 4)
        data = json.loads(
            (tmp_path / "fig2a_spanning_tree_metrics.json").read_text())
        assert data["completed"] is False
        assert data["initial_violations"]

    def test_runtime_violation_exit_three(self, tmp_path):
        res = run_cli("run", "fig2a_spanning_tree", "--out", str(tmp_path),
                      "--override",
                      "plant.initial_velocities=[[100000,100000],[0,0],[0,0],"
                      "[0,0],[0,0]]",
                      "--override", "sim.horizon=1.0")
        assert res.returncode == 3
        assert "funnel violation" in res.stderr
        assert "partial log" in res.stderr
        data = json.loads(
            (tmp_path / "fig2a_spanning_tree_metrics.json").read_text())
        assert data["completed"] is False
        assert data["violation_count"] == 1

    def test_missing_scenario_exit_one(self, tmp_path):
        res = run_cli("run", "no_such_scenario", "--out", str(tmp_path))
        assert res.returncode == 1
        assert "error:" in res.stderr

    def test_bad_override_exit_one(self, tmp_path):
        res = run_cli("run", "fig2a_spanning_tree", "--out", str(tmp_path),
                      "--override", "sim.dt=-1")
        assert res.returncode == 1
        assert "dt must be positive" in res.stderr


class TestCheckCommand:
    def test_clean_start(self):
        res = run_cli("check", "fig2b_cycle")
        assert res.returncode == 0
        assert "inside the funnel" in res.stdout

    def test_violated_start(self):
        res = run_cli("check", "fig2a_spanning_tree", "--override",
                      "plant.initial_positions=[[50,50],[0.6,2.3],[-0.8,2.1],"
                      "[-1.4,0.5],[-0.2,0.35]]")
        assert res.returncode == 2
        assert "outside band" in res.stderr


class TestLemma1Command:
    def test_tree_certificate(self):
        res = run_cli("lemma1", "fig2a_spanning_tree")
        assert res.returncode == 0
        assert "pass" in res.stdout
        assert "lam_min" in res.stdout

    def test_cycle_certificate(self):
        res = run_cli("lemma1", "fig2b_cycle")
        assert res.returncode == 0
        assert "pass" in res.stdout


class TestSweepCommand:
    def test_parallel_runs(self, tmp_path):
        res = run_cli("sweep", "fig3_global", "fig3_global", "--out",
                      str(tmp_path), "--jobs", "2")
        assert res.returncode == 0
        assert (tmp_path / "fig3_global.csv").exists()


class TestUsage:
    def test_no_subcommand(self):
        res = run_cli()
        assert res.returncode == 2  # argparse usage error
        assert "usage" in res.stderr.lower()

    def test_help(self):
        res = run_cli("--help")
        assert res.returncode == 0
        assert "run" in res.stdout and "sweep" in res.stdout
