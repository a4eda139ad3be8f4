import csv
import json
import subprocess
import sys

from fixture_trainer.cli import main


def spectail(*args):
    return subprocess.run(
        [sys.executable, "-m", "spectail.cli", *args], capture_output=True, text=True
    )


TINY_ARGS = ["--train-size", "120", "--epochs", "2", "--widths", "64,64,16,10", "--quiet"]


def test_gradient_writes_bundles_and_manifest(tmp_path):
    out = tmp_path / "runs"
    assert main(["--levels", "0,0.5,1.0", "--seeds", "2", "--out", str(out), *TINY_ARGS]) == 0
    with open(out / "runs.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 6
    assert [r["noise_fraction"] for r in rows] == ["0.0"] * 2 + ["0.5"] * 2 + ["1.0"] * 2
    for row in rows:
        assert (out / row["bundle_path"] / "manifest.json").exists()


def test_manifest_feeds_calibrate_unchanged(tmp_path):
    out = tmp_path / "runs"
    main(["--levels", "0,0.5,1.0", "--seeds", "1", "--out", str(out), *TINY_ARGS])
    model = tmp_path / "model.json"
    proc = spectail("calibrate", str(out / "runs.csv"), "--out", str(model), "--quiet")
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(model.read_text())
    assert [n["eta"] for n in doc["nodes"]] == [0.0, 0.5, 1.0]


def test_sweep_mode_exercises_comparison(tmp_path):
    out = tmp_path / "sweep"
    assert main(["--mode", "sweep", "--out", str(out), *TINY_ARGS]) == 0
    with open(out / "runs.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 8
    assert all(r["noise_fraction"] == "0.0" for r in rows)
    table = tmp_path / "table.json"
    proc = spectail("compare", str(out / "runs.csv"), "--json", str(table), "--quiet")
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(table.read_text())
    assert len(doc["measures"]) == 7
    assert any("per run" in w for w in doc["warnings"])


def test_mnist_subset_needs_data_dir(tmp_path, capsys):
    code = main(["--dataset", "mnist-subset", "--out", str(tmp_path / "x"), *TINY_ARGS,
                 "--widths", "784,32,10"])
    assert code == 2


def test_bad_level_rejected(tmp_path):
    assert main(["--levels", "0,2.0", "--out", str(tmp_path / "x"), *TINY_ARGS]) == 2
