from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from crowdtime import LabelSpace, load_judgments_csv, majority_vote

from conftest import make_dataset


def run_cli(*args, env=None):
    return subprocess.run(
        [sys.executable, "-m", "crowdtime", *args],
        capture_output=True, text=True, env=env,
    )


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def fixture_files(tmp_path):
    d = make_dataset(
        [
            ("t1", "w1", 1, 12.0), ("t1", "w2", 1, 30.0), ("t1", "w3", 0, 45.0),
            ("t2", "w1", 0, 15.0), ("t2", "w2", 0, 22.0), ("t2", "w3", 1, 18.0),
            ("t3", "w1", 1, 25.0), ("t3", "w2", 1, 14.0), ("t3", "w3", 1, 33.0),
        ],
        gold={"t1": 1, "t2": 0, "t3": 1},
    )
    from crowdtime import save_gold_csv, save_judgments_csv

    jpath = tmp_path / "judgments.csv"
    gpath = tmp_path / "gold.csv"
    save_judgments_csv(d, jpath)
    save_gold_csv(d.gold, gpath)
    return d, jpath, gpath, tmp_path


def test_aggregate_mv_matches_library(fixture_files):
    d, jpath, _, tmp = fixture_files
    out = tmp / "mv_out"
    res = run_cli("aggregate", "--model", "mv", "--judgments", str(jpath),
                  "--classes", "2", "--out", str(out))
    assert res.returncode == 0, res.stderr
    rows = {r["task_id"]: r for r in read_csv(out / "labels.csv")}
    expected = majority_vote(d)
    for task, dist in expected.items():
        assert int(rows[task]["label"]) == int(np.argmax(dist))
        assert float(rows[task]["p_1"]) == dist[1]
    assert (out / "workers.csv").exists()
    assert json.loads((out / "run.json").read_text())["model"] == "mv"


def test_aggregate_bcctime_deterministic(fixture_files):
    _, jpath, _, tmp = fixture_files
    outs = []
    for name in ("a", "b"):
        out = tmp / name
        res = run_cli("aggregate", "--model", "bcctime", "--judgments", str(jpath),
                      "--classes", "2", "--seed", "7", "--iterations", "200",
                      "--burnin", "50", "--out", str(out), "--no-plot")
        assert res.returncode == 0, res.stderr
        outs.append(out)
    for fname in ("labels.csv", "workers.csv", "durations.csv", "validity.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
    runs = [json.loads((o / "run.json").read_text()) for o in outs]
    for r in runs:
        del r["wall_time_seconds"]
        r["model_meta"].pop("fit_seconds", None)
    assert runs[0] == runs[1]


def test_aggregate_onecoin_multiclass_exits_2(fixture_files):
    _, jpath, _, tmp = fixture_files
    res = run_cli("aggregate", "--model", "onecoin", "--judgments", str(jpath),
                  "--classes", "5", "--out", str(tmp / "oc"))
    assert res.returncode == 2
    assert "NotBinary" in res.stderr


def test_aggregate_unknown_model_usage_error(fixture_files):
    _, jpath, _, tmp = fixture_files
    res = run_cli("aggregate", "--model", "nope", "--judgments", str(jpath),
                  "--classes", "2")
    assert res.returncode == 2


def test_aggregate_hyperparameter_override_logged(fixture_files):
    _, jpath, _, tmp = fixture_files
    out = tmp / "hp"
    res = run_cli("aggregate", "--model", "bcctime", "--judgments", str(jpath),
                  "--classes", "2", "--iterations", "100", "--burnin", "20",
                  "--hp.sigma0-mean", "1.5", "--hp.alpha0", "9.0",
                  "--out", str(out), "--no-plot")
    assert res.returncode == 0, res.stderr
    run = json.loads((out / "run.json").read_text())
    assert run["hyperparameters"]["sigma0_mean"] == 1.5
    assert run["hyperparameters"]["alpha0"] == 9.0
    assert run["hyperparameters"]["beta0"] == 0.3 * 3  # default still logged


def test_aggregate_bcctime_writes_durations_and_plot(fixture_files):
    _, jpath, _, tmp = fixture_files
    out = tmp / "plotted"
    res = run_cli("aggregate", "--model", "bcctime", "--judgments", str(jpath),
                  "--classes", "2", "--iterations", "100", "--burnin", "20",
                  "--out", str(out))
    assert res.returncode == 0, res.stderr
    assert (out / "durations.csv").exists()
    assert (out / "durations.png").exists()
    rows = read_csv(out / "durations.csv")
    assert {r["task_id"] for r in rows} == {"t1", "t2", "t3"}
    for r in rows:
        assert float(r["lower_seconds"]) < float(r["upper_seconds"])


def test_simulate_deterministic_and_reingestible(tmp_path):
    outs = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        res = run_cli("simulate", "--tasks", "12", "--workers", "30",
                      "--spammer-fraction", "0.3", "--judgments-per-task", "10",
                      "--seed", "3", "--out", str(out))
        assert res.returncode == 0, res.stderr
        outs.append(out)
    for fname in ("judgments.csv", "gold.csv", "truth.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    truth = json.loads((outs[0] / "truth.json").read_text())
    assert len(truth["spammers"]) == 9  # floor(0.3 * 30)

    d = load_judgments_csv(outs[0] / "judgments.csv", LabelSpace(2),
                           gold_path=outs[0] / "gold.csv")
    assert d.n_tasks == 12 and d.n_judgments == 120
    assert set(truth["spammers"]) <= set(d.worker_ids)


def test_simulate_invalid_config_exits_2(tmp_path):
    res = run_cli("simulate", "--tasks", "10", "--workers", "5",
                  "--judgments-per-task", "9", "--out", str(tmp_path))
    assert res.returncode == 2
    assert "ConfigInvalid" in res.stderr


def test_evaluate_perfect_data_all_models(tmp_path):
    res = run_cli("simulate", "--tasks", "40", "--workers", "6",
                  "--reliable-accuracy", "1.0", "--judgments-per-task", "4",
                  "--seed", "5", "--out", str(tmp_path))
    assert res.returncode == 0, res.stderr
    out = tmp_path / "eval"
    res = run_cli("evaluate", "--judgments", str(tmp_path / "judgments.csv"),
                  "--gold", str(tmp_path / "gold.csv"), "--classes", "2",
                  "--models", "mv,vd,onecoin,bcc,bcctime,random",
                  "--iterations", "300", "--burnin", "100", "--seed", "1",
                  "--out", str(out), "--no-plot")
    assert res.returncode == 0, res.stderr
    rows = {r["method"]: r for r in read_csv(out / "comparison.csv")}
    for method in ("mv", "vd", "onecoin", "bcc", "bcctime"):
        assert float(rows[method]["auc"]) == 1.0
        assert float(rows[method]["accuracy"]) == 1.0
    assert float(rows["random"]["auc"]) == 0.5


def test_evaluate_subsample_and_figures(fixture_files):
    _, jpath, gpath, tmp = fixture_files
    out = tmp / "eval2"
    res = run_cli("evaluate", "--judgments", str(jpath), "--gold", str(gpath),
                  "--classes", "2", "--models", "mv,vd",
                  "--subsample", "0.8,1.0", "--repeats", "2", "--seed", "2",
                  "--out", str(out))
    assert res.returncode == 0, res.stderr
    sub = read_csv(out / "subsample.csv")
    assert {r["method"] for r in sub} == {"mv", "vd"}
    assert (out / "comparison.png").exists()
    assert (out / "subsample.png").exists()


def test_evaluate_skips_onecoin_on_multiclass(tmp_path):
    d = make_dataset(
        [("t1", "w1", 2, 5.0), ("t1", "w2", 2, 6.0), ("t2", "w1", 0, 4.0),
         ("t2", "w2", 1, 8.0)],
        classes=3, gold={"t1": 2, "t2": 0},
    )
    from crowdtime import save_gold_csv, save_judgments_csv

    jpath, gpath = tmp_path / "j.csv", tmp_path / "g.csv"
    save_judgments_csv(d, jpath)
    save_gold_csv(d.gold, gpath)
    out = tmp_path / "out"
    res = run_cli("evaluate", "--judgments", str(jpath), "--gold", str(gpath),
                  "--classes", "3", "--models", "mv,onecoin",
                  "--out", str(out), "--no-plot")
    assert res.returncode == 0, res.stderr
    assert "skipping onecoin" in res.stderr
    rows = read_csv(out / "comparison.csv")
    assert [r["method"] for r in rows] == ["mv"]
    assert rows[0]["auc"] == ""  # no AUC column value for C=3


def test_analyze_time_outputs(fixture_files):
    d, jpath, gpath, tmp = fixture_files
    out = tmp / "analysis"
    res = run_cli("analyze-time", "--judgments", str(jpath), "--gold", str(gpath),
                  "--classes", "2", "--bin-edges", "20,40",
                  "--min-judgments", "3", "--out", str(out))
    assert res.returncode == 0, res.stderr
    rows = read_csv(out / "binned_quality.csv")
    assert [float(r["threshold_seconds"]) for r in rows] == [20.0, 40.0, float("inf")]

    from crowdtime import time_binned_quality

    oracle = time_binned_quality(d, [20.0, 40.0, float("inf")])
    for row, expected in zip(rows, oracle):
        assert int(row["n_judgments"]) == expected.n_judgments
        assert float(row["accuracy"]) == expected.accuracy
        assert float(row["precision"]) == expected.precision

    corr = read_csv(out / "per_task_correlation.csv")
    assert {r["task_id"] for r in corr} == {"t1", "t2", "t3"}
    assert (out / "binned_quality.png").exists()
    assert (out / "per_task_correlation.png").exists()
    assert (out / "task_time_histograms.csv").exists()


def test_analyze_time_default_edges_recorded(fixture_files):
    _, jpath, gpath, tmp = fixture_files
    out = tmp / "analysis_default"
    res = run_cli("analyze-time", "--judgments", str(jpath), "--gold", str(gpath),
                  "--classes", "2", "--out", str(out), "--no-plot")
    assert res.returncode == 0, res.stderr
    run = json.loads((out / "run.json").read_text())
    assert run["bin_edges_source"] == "default_log_spaced"
    assert len(run["bin_edges"]) == 12


def test_analyze_time_multiclass_omits_binary_columns(tmp_path):
    rows = [("t1", f"w{i}", i % 3, 5.0 + i) for i in range(5)]
    d = make_dataset(rows, classes=5, gold={"t1": 1})
    from crowdtime import save_gold_csv, save_judgments_csv

    jpath, gpath = tmp_path / "j.csv", tmp_path / "g.csv"
    save_judgments_csv(d, jpath)
    save_gold_csv(d.gold, gpath)
    out = tmp_path / "a"
    res = run_cli("analyze-time", "--judgments", str(jpath), "--gold", str(gpath),
                  "--classes", "5", "--out", str(out), "--no-plot")
    assert res.returncode == 0, res.stderr
    header = (out / "binned_quality.csv").read_text().splitlines()[0]
    assert "precision" not in header and "recall" not in header


def test_missing_judgments_file_exits_2(tmp_path):
    res = run_cli("aggregate", "--model", "mv",
                  "--judgments", str(tmp_path / "nope.csv"), "--classes", "2")
    assert res.returncode == 2
