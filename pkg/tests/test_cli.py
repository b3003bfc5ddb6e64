import csv
import json

import numpy as np
import pytest

from conftest import tiny_config
from vatcmr.cli import main
from vatcmr.data import load_dataset


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    """Dataset + trained checkpoint produced through the CLI itself."""
    root = tmp_path_factory.mktemp("cli")
    data_dir = root / "data"
    rc = main([
        "generate-data", "--classes", "3", "--train", "24", "--val", "9", "--test", "9",
        "--seed", "11", "--image-size", "16", "--audio-length", "256", "--out", str(data_dir),
    ])
    assert rc == 0

    config = tiny_config(ce_epochs=1, triplet_epochs=2)
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config.to_dict()))
    run_dir = root / "run"
    rc = main(["train", "--config", str(config_path), "--data", str(data_dir), "--out", str(run_dir)])
    assert rc == 0
    return root, data_dir, run_dir


def test_generate_data_writes_loadable_dataset(cli_env):
    _, data_dir, _ = cli_env
    dataset = load_dataset(data_dir)
    assert len(dataset.train) == 24
    assert dataset.manifest["num_classes"] == 3


def test_train_writes_metrics_and_checkpoint(cli_env):
    _, _, run_dir = cli_env
    assert (run_dir / "metrics.csv").is_file()
    assert (run_dir / "checkpoint" / "checkpoint.json").is_file()
    with open(run_dir / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["stage"] for r in rows] == ["stage1", "stage2", "stage2"]


def test_evaluate_writes_results_csv(cli_env, tmp_path):
    _, data_dir, run_dir = cli_env
    out = tmp_path / "results.csv"
    rc = main([
        "evaluate", "--checkpoint", str(run_dir / "checkpoint"), "--data", str(data_dir),
        "--query", "audio", "--space", "fused", "--out", str(out),
    ])
    assert rc == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    row = rows[0]
    assert row["query_modality"] == "audio"
    assert row["space"] == "fused"
    assert 0.0 <= float(row["map"]) <= 1.0
    assert int(row["num_queries"]) == 9


def test_evaluate_single_modality_space(cli_env, tmp_path):
    _, data_dir, run_dir = cli_env
    out = tmp_path / "results.csv"
    rc = main([
        "evaluate", "--checkpoint", str(run_dir / "checkpoint"), "--data", str(data_dir),
        "--query", "vision", "--space", "touch", "--out", str(out),
    ])
    assert rc == 0


def test_ablate_runs_small_grid(cli_env, tmp_path):
    root, data_dir, _ = cli_env
    grid = [
        {"query": "audio", "space": "vision+touch", "dominant": "audio", "attention": True, "seed": 0},
        {"query": "vision", "space": "audio", "dominant": "joint", "attention": False, "seed": 0},
    ]
    grid_path = tmp_path / "grid.json"
    grid_path.write_text(json.dumps(grid))
    config_path = root / "config.json"
    out_dir = tmp_path / "grid_out"
    rc = main([
        "ablate", "--grid", str(grid_path), "--config", str(config_path),
        "--data", str(data_dir), "--out", str(out_dir),
    ])
    assert rc == 0
    with open(out_dir / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert all(r["status"] == "ok" for r in rows)


def test_ablate_requires_grid_or_preset(cli_env, tmp_path):
    _, data_dir, _ = cli_env
    rc = main(["ablate", "--data", str(data_dir), "--out", str(tmp_path / "x")])
    assert rc == 2


def test_project_writes_2d_points(cli_env, tmp_path):
    _, data_dir, run_dir = cli_env
    out = tmp_path / "points.csv"
    rc = main([
        "project", "--checkpoint", str(run_dir / "checkpoint"), "--data", str(data_dir),
        "--split", "test", "--space", "fused", "--out", str(out),
    ])
    assert rc == 0
    points = np.loadtxt(out, delimiter=",", skiprows=1)
    assert points.shape == (9, 3)


def test_curve_extracts_stage2_rows(cli_env, tmp_path):
    _, _, run_dir = cli_env
    out = tmp_path / "curve.csv"
    rc = main(["curve", "--metrics", str(run_dir / "metrics.csv"), "--out", str(out)])
    assert rc == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["epoch"]) for r in rows] == [1, 2]
