from __future__ import annotations

import json

import pytest

from hivqcnn import harness
from hivqcnn.cli import main

QUICK = ["--set", "qcnn.iteration_cap=3", "--set", "nqe.iteration_cap=10", "--seeds", "2"]


@pytest.fixture(scope="module")
def snapshot(tmp_path_factory):
    path = tmp_path_factory.mktemp("snap") / "snapshot.json"
    assert main(["preprocess", "--synthetic", "--set", "data.synthetic_per_class=30", "--out", str(path)]) == 0
    return path


def test_run_then_report(snapshot, tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--snapshot", str(snapshot), "--condition", "PCA-11", "--out", str(out)] + QUICK) == 0
    rows = harness.rows_from_json((out / "results.json").read_text())
    assert rows[0].condition_id == "PCA-11" and len(rows[0].seeds) == 2
    again = tmp_path / "again"
    assert main(["report", str(out / "results.json"), "--out", str(again)]) == 0
    assert (again / "results.csv").read_text() == (out / "results.csv").read_text()


def test_run_matrix_with_filter(snapshot, tmp_path):
    out = tmp_path / "m"
    argv = ["run-matrix", "--snapshot", str(snapshot), "--filter", "id=PCA-12,PCA-13", "--out", str(out)] + QUICK
    assert main(argv) == 0
    ids = [r["condition_id"] for r in json.loads((out / "results.json").read_text())]
    assert ids == ["PCA-12", "PCA-13"]


def test_train_verbs(snapshot, tmp_path):
    base = ["--snapshot", str(snapshot), "--condition", "NQE-13"] + QUICK[:4]
    assert main(["train-nqe", "--out", str(tmp_path / "n")] + base) == 0
    assert main(["train-qcnn", "--out", str(tmp_path / "q")] + base) == 0
    assert any((tmp_path / "q").iterdir())


def test_selftest():
    assert main(["selftest", "-q"]) == 0


@pytest.mark.parametrize("argv", [
    ["run", "--condition", "NQE-99", "--snapshot", "missing.json"],
    ["run-matrix", "--filter", "colour=red", "--snapshot", "missing.json"],
    ["run", "--condition", "PCA-1", "--set", "bogus.key=1"],
    ["preprocess", "--data-dir", "/nonexistent-dir"],
])
def test_errors_exit_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "x")]) == 2
