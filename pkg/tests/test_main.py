import os
import subprocess
import sys
from pathlib import Path

import pytest

from d2d_assign.main import (
    EXIT_ALL_INFEASIBLE,
    EXIT_CAPACITY,
    EXIT_CONFIG,
    EXIT_OK,
    build_parser,
    run_cli,
)

TINY = (
    "network:\n"
    "  uplink_cellular_links: 1\n"
    "  downlink_cellular_links: 1\n"
    "  d2d_links: 2\n"
    "  uplink_channels: 1\n"
    "  downlink_channels: 1\n"
    "experiment:\n"
    "  drops: 2\n"
    "  base_seed: 3\n"
    "logging:\n"
    "  level: warning\n"
)


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY)
    return str(path)


def test_successful_run_writes_csv(tiny_config, tmp_path):
    out = tmp_path / "rows.csv"
    code = run_cli(["--config", tiny_config, "--out", str(out), "--algorithms", "dp,cluster"])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert lines[0].startswith("drop_id,seed,algorithm")


def test_overrides_reach_the_experiment(tiny_config, tmp_path):
    out = tmp_path / "rows.csv"
    code = run_cli([
        "--config", tiny_config, "--out", str(out), "--drops", "1",
        "--algorithms", "semi_orthogonal", "--csi", "full,s3", "--d2d-links", "1",
    ])
    assert code == EXIT_OK
    body = out.read_text().splitlines()[1:]
    assert [line.split(",")[3] for line in body] == ["full", "s3"]


def test_unknown_algorithm(tiny_config, tmp_path):
    assert run_cli(["--config", tiny_config, "--algorithms", "simplex", "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_access_with_partial_csi(tiny_config, tmp_path):
    code = run_cli(["--config", tiny_config, "--objective", "access", "--csi", "s1", "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_CONFIG


def test_all_drops_infeasible(tmp_path):
    path = tmp_path / "hard.yaml"
    path.write_text(TINY + "qos:\n  sinr_min_db: 90.0\n")
    assert run_cli(["--config", str(path), "--out", str(tmp_path / "x.csv")]) == EXIT_ALL_INFEASIBLE


def test_dp_capacity(tmp_path):
    path = tmp_path / "big.yaml"
    path.write_text(TINY.replace("experiment:\n", "experiment:\n  max_dp_links: 3\n"))
    code = run_cli(["--config", str(path), "--algorithms", "dp", "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_CAPACITY


def test_parser_rejects_unknown_objective():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--objective", "throughput"])


def test_csv_lists_are_normalised():
    args = build_parser().parse_args(["--algorithms", " DP, cluster ,", "--csi", "Full"])
    assert args.algorithms == ("dp", "cluster")
    assert args.csi == ("full",)


def test_config_error_goes_to_stderr(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("experiment:\n  drops: 0\n")
    src = str(Path(__file__).resolve().parents[1] / "src")
    env = {**os.environ, "PYTHONPATH": os.pathsep.join(filter(None, [src, os.environ.get("PYTHONPATH")]))}
    proc = subprocess.run(
        [sys.executable, "-m", "d2d_assign", "--config", str(path), "--out", str(tmp_path / "x.csv")],
        capture_output=True, text=True, env=env, timeout=120,
    )
    assert proc.returncode == EXIT_CONFIG
    assert proc.stdout == ""
    assert "app.config_error" in proc.stderr
    assert "experiment.drops must be >= 1" in proc.stderr
