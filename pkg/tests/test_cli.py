import filecmp
import json
import os

import pytest

from cyclescreen.cli import ALL_MODELS, main
from cyclescreen.synth import AnomalySpec, generate_cell, write_dataset

FEATURES = "dv_max,dq_max"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    cells = {
        "cellA": generate_cell(
            50, samples_per_cycle=32, seed=11, cell_id="cellA",
            anomalies=(AnomalySpec("point", (10, 30), 0.4),),
        ),
        "cellB": generate_cell(
            50, samples_per_cycle=32, seed=22, cell_id="cellB",
            anomalies=(AnomalySpec("collective", (20,), 0.3),),
        ),
    }
    meas = root / "meas.csv"
    labels = root / "labels.csv"
    write_dataset(cells, str(meas), str(labels))
    manifest = root / "manifest.csv"
    manifest.write_text("cell_id,role\ncellA,train\ncellB,test\n")
    return {"meas": str(meas), "labels": str(labels), "manifest": str(manifest)}


def run(*argv):
    return main(list(argv))


def tree_bytes(root):
    out = {}
    for dirpath, _dirnames, filenames in os.walk(root):
        for name in filenames:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as handle:
                out[os.path.relpath(path, root)] = handle.read()
    return out


def test_ingest(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    rc = run("ingest", "--input", dataset["meas"], "--out", str(out))
    assert rc == 0
    assert (out / "cycles.csv").is_file()
    assert "100 cycles across 2 cells" in capsys.readouterr().out


def test_features(dataset, tmp_path):
    out = tmp_path / "out"
    rc = run(
        "features", "--input", dataset["meas"], "--out", str(out),
        "--recipe", "custom",
    )
    assert rc == 0
    for cell in ("cellA", "cellB"):
        table = (out / cell / "features.csv").read_text()
        header = table.splitlines()[0]
        assert "dv_max" in header and "dq_max" in header
        assert (out / cell / "feature_notes.txt").is_file()


def test_detect_all_models_and_flags(dataset, tmp_path):
    out = tmp_path / "out"
    rc = run(
        "detect", "--input", dataset["meas"], "--out", str(out),
        "--recipe", "custom", "--feature", FEATURES,
    )
    assert rc == 0
    for cell in ("cellA", "cellB"):
        for model in ALL_MODELS:
            assert (out / cell / model / "verdict.csv").is_file()
    # a point spike disturbs consecutive voltage differences, so the robust
    # univariate rules on dv_max must catch both planted cycles of cellA
    text = (out / "cellA" / "iqr" / "verdict.csv").read_text()
    lines = text.splitlines()
    assert lines[0].startswith("# method=iqr feature=dv_max")
    assert lines[1] == "cycle_index,score,flagged"
    flagged = {
        int(row.split(",")[0]) for row in lines[2:] if row.split(",")[2] == "1"
    }
    assert {10, 30} <= flagged
    ml = (out / "cellA" / "iforest" / "verdict.csv").read_text().splitlines()
    assert ml[0].startswith("# model=iforest features=dv_max|dq_max")
    assert "threshold=0.7" in ml[0]


def test_detect_single_model_and_contamination(dataset, tmp_path):
    out = tmp_path / "out"
    rc = run(
        "detect", "--input", dataset["meas"], "--out", str(out),
        "--recipe", "custom", "--feature", FEATURES,
        "--model", "iforest", "--contamination-threshold",
    )
    assert rc == 0
    header = (out / "cellA" / "iforest" / "verdict.csv").read_text().splitlines()[0]
    assert "top_fraction=" in header


def test_exit_codes(dataset, tmp_path, capsys):
    out = str(tmp_path / "out")
    assert run("detect", "--input", dataset["meas"], "--out", out,
               "--model", "nosuch") == 1
    assert "unknown model 'nosuch'" in capsys.readouterr().err
    assert run("ingest", "--input", str(tmp_path / "absent.csv"), "--out", out) == 2
    assert "i/o error" in capsys.readouterr().err
    assert run("evaluate", "--input", out, "--out", out) == 1
    assert "requires --labels" in capsys.readouterr().err
    assert run("ingest", "--input", dataset["meas"], "--out", out,
               "--col", "novalue") == 1
    assert run("detect", "--input", dataset["meas"], "--out", out,
               "--recipe", "custom") == 1
    assert "--feature" in capsys.readouterr().err


def test_detect_rerun_is_byte_identical(dataset, tmp_path):
    outs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        for model in ("zscore", "euclidean", "iforest", "gmm"):
            rc = run(
                "detect", "--input", dataset["meas"], "--out", str(out),
                "--recipe", "custom", "--feature", FEATURES,
                "--model", model, "--seed", "7",
            )
            assert rc == 0
        outs.append(tree_bytes(out))
    assert outs[0] == outs[1]


def test_parallel_jobs_match_serial(dataset, tmp_path):
    results = []
    for jobs, name in (("1", "serial"), ("2", "parallel")):
        out = tmp_path / name
        rc = run(
            "detect", "--input", dataset["meas"], "--out", str(out),
            "--recipe", "custom", "--feature", FEATURES,
            "--model", "knn", "--jobs", jobs,
        )
        assert rc == 0
        results.append(tree_bytes(out))
    assert results[0] == results[1]


def test_tune_transfer_writes_artifacts(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    rc = run(
        "tune", "--input", dataset["meas"], "--out", str(out),
        "--labels", dataset["labels"], "--manifest", dataset["manifest"],
        "--recipe", "custom", "--feature", FEATURES,
        "--model", "iforest", "--trials", "5", "--seed", "3",
    )
    assert rc == 0
    assert "perfect-recall fraction" in capsys.readouterr().out
    tdir = out / "tuning" / "iforest"
    trials = (tdir / "trials.csv").read_text().splitlines()
    assert trials[0].startswith("cell_id,trial_id,")
    assert trials[0].endswith("objective_1,objective_2,kind")
    # manifest restricts training to cellA
    assert all(row.startswith("cellA,") for row in trials[1:])
    assert len(trials) == 6
    assert (tdir / "pareto.csv").is_file()
    config = json.loads((tdir / "config.json").read_text())
    assert config["model"] == "iforest"
    assert config["seed"] == 0
    assert set(config["params"]) >= {"n_estimators", "contamination"}

    # the tuned config feeds straight back into detect
    rc = run(
        "detect", "--input", dataset["meas"], "--out", str(tmp_path / "det"),
        "--recipe", "custom", "--feature", FEATURES,
        "--model", "iforest", "--config", str(tdir / "config.json"),
    )
    assert rc == 0
    # but only for the model it was tuned for
    rc = run(
        "detect", "--input", dataset["meas"], "--out", str(tmp_path / "det2"),
        "--recipe", "custom", "--feature", FEATURES,
        "--model", "knn", "--config", str(tdir / "config.json"),
    )
    assert rc == 1


def test_tune_proxy_writes_per_cell_compromise(dataset, tmp_path):
    out = tmp_path / "out"
    rc = run(
        "tune", "--input", dataset["meas"], "--out", str(out),
        "--manifest", dataset["manifest"], "--strategy", "proxy",
        "--recipe", "custom", "--feature", FEATURES,
        "--model", "knn", "--trials", "5",
    )
    assert rc == 0
    tdir = out / "tuning" / "knn"
    assert (tdir / "compromise_cellB.json").is_file()  # test cells only
    assert not (tdir / "compromise_cellA.json").exists()
    rows = (tdir / "trials.csv").read_text().splitlines()
    assert all(row.endswith("loss_inliers") for row in rows[1:])


def test_evaluate_report(dataset, tmp_path):
    run_dir = tmp_path / "run"
    for model in ("iqr", "mad", "euclidean"):
        assert run(
            "detect", "--input", dataset["meas"], "--out", str(run_dir),
            "--recipe", "custom", "--feature", FEATURES, "--model", model,
        ) == 0
    out = tmp_path / "eval"
    rc = run(
        "evaluate", "--input", str(run_dir), "--out", str(out),
        "--labels", dataset["labels"],
    )
    assert rc == 0
    rows = (out / "report.csv").read_text().splitlines()
    assert rows[0] == "model,metric,value,passed"
    models = {row.split(",")[0] for row in rows[1:]}
    assert models == {"iqr", "mad", "euclidean"}
    for row in rows[1:]:
        model, metric, value, passed = row.split(",")
        assert -1.0 <= float(value) <= 1.0
        assert passed in ("0", "1")
    txt = (out / "report.txt").read_text()
    assert "macro recall" in txt


def test_scoremap(dataset, tmp_path):
    out = tmp_path / "out"
    rc = run(
        "scoremap", "--input", dataset["meas"], "--out", str(out),
        "--recipe", "custom", "--feature", FEATURES,
        "--model", "euclidean", "--resolution", "12",
    )
    assert rc == 0
    lines = (out / "cellA" / "euclidean" / "grid.csv").read_text().splitlines()
    assert len(lines) == 2 + 12 * 12
    assert lines[1] == "dv_max,dq_max,score"
    sidecar = json.loads((out / "cellA" / "euclidean" / "grid.json").read_text())
    assert sidecar["resolution"] == [12, 12]
    assert sidecar["features"] == ["dv_max", "dq_max"]
    assert run(
        "scoremap", "--input", dataset["meas"], "--out", str(out),
        "--model", "zscore",
    ) == 1


def test_column_remap_and_delimiter(dataset, tmp_path):
    renamed = tmp_path / "renamed.csv"
    with open(dataset["meas"], "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    header = lines[0].replace("voltage_v", "U").replace("capacity_ah", "Q")
    body = [header] + lines[1:]
    renamed.write_text("\n".join(r.replace(",", ";") for r in body) + "\n")
    rc = run(
        "ingest", "--input", str(renamed), "--out", str(tmp_path / "out"),
        "--delimiter", ";", "--col", "voltage=U", "--col", "capacity=Q",
    )
    assert rc == 0
    # normalized output uses canonical names again, so it must equal the
    # export of the original file
    rc = run("ingest", "--input", dataset["meas"], "--out", str(tmp_path / "ref"))
    assert rc == 0
    assert filecmp.cmp(
        tmp_path / "out" / "cycles.csv", tmp_path / "ref" / "cycles.csv",
        shallow=False,
    )


def test_module_entry_point(dataset, tmp_path):
    import subprocess
    import sys

    result = subprocess.run(
        [
            sys.executable, "-m", "cyclescreen.cli", "ingest",
            "--input", dataset["meas"], "--out", str(tmp_path / "out"),
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "ingested" in result.stdout
