import json
import os

import pandas as pd
import pytest

from repgraph.cli import RUNTIME_ONLY
from repgraph.cli import RepgraphRunner
from repgraph.cli import main
from repgraph.cli import parse_grid
from repgraph.core import dataset_io
from repgraph.core.model import GraphEstimate
from repgraph.core.model import Rule
from repgraph.errors import UsageError
from repgraph.graphs.graph_assembly import write_graph_json

QUIET = ["--log-level", "WARNING"]


def run(command, out_dir, *args, threads=1):
    return main([command, "--out-dir", str(out_dir), "--threads", str(threads), *QUIET, *args])


def read_bytes(directory, name):
    with open(os.path.join(directory, name), "rb") as handle:
        return handle.read()


def read_json(directory, name):
    with open(os.path.join(directory, name), encoding="utf-8") as handle:
        return json.load(handle)


@pytest.fixture(name="simulated")
def fixture_simulated(tmp_path):
    out = tmp_path / "sim"
    args = ("--scenario", "combined-piecewise", "--n", "4", "--T", "6", "--p", "5", "--q", "2")
    assert run("simulate", out, *args) == 0
    return out


def test_parse_grid():
    assert parse_grid("0.1,0.2, 0.4") == [0.1, 0.2, 0.4]
    assert parse_grid("log:0.01:1:3") == pytest.approx([1.0, 0.1, 0.01])
    for text in ("", "a,b", "log:1:2"):
        with pytest.raises(UsageError):
            parse_grid(text)


def test_simulate_writes_the_dataset_and_truth(simulated):
    names = {"dataset.csv", "truth_edges.csv", "truth_precision.csv", "truth_transition.csv", "truth_latent.csv"}
    assert names | {"manifest.json"} == set(os.listdir(simulated))
    manifest = read_json(simulated, "manifest.json")
    assert manifest["tool"] == "repgraph"
    assert manifest["seed"] == 0
    assert manifest["dataset"] == {"family": "gaussian", "n": 4, "T": 6, "p": 5, "q": 2}
    assert not set(RUNTIME_ONLY) & set(manifest["config"])
    d = dataset_io.read_dataset_csv(str(simulated / "dataset.csv"))
    assert d.values.shape == (4, 6, 5)


def test_simulate_output_does_not_depend_on_threads(tmp_path):
    args = ("--scenario", "ar1-sparse", "--n", "3", "--T", "5", "--p", "6", "--seed", "7")
    assert run("simulate", tmp_path / "one", *args, threads=1) == 0
    assert run("simulate", tmp_path / "four", *args, threads=4) == 0
    for name in os.listdir(tmp_path / "one"):
        assert read_bytes(tmp_path / "one", name) == read_bytes(tmp_path / "four", name)


def test_fit_output_does_not_depend_on_threads(simulated, tmp_path):
    args = ("--dataset", str(simulated / "dataset.csv"), "--lambda", "0.05", "--beta", "0.05", "--gamma", "0.05")
    assert run("fit", tmp_path / "one", *args, threads=1) == 0
    assert run("fit", tmp_path / "three", *args, threads=3) == 0
    for name in ("graph.json", "coefficients.csv", "delta.csv", "manifest.json"):
        assert read_bytes(tmp_path / "one", name) == read_bytes(tmp_path / "three", name)


def test_fit_with_huge_penalties_is_empty(simulated, tmp_path, capsys):
    out = tmp_path / "fit"
    data = str(simulated / "dataset.csv")
    assert run("fit", out, "--dataset", data, "--lambda", "1e6", "--beta", "1e6", "--gamma", "1e6") == 0
    assert read_json(out, "graph.json")["edges"] == []
    manifest = read_json(out, "manifest.json")
    assert manifest["edges"] == 0
    assert manifest["unconverged_nodes"] == []
    printed = capsys.readouterr().out.split()
    assert os.path.join(str(out), "graph.json") in printed


def test_fit_with_theory_defaults(simulated, tmp_path):
    out = tmp_path / "theory"
    data = str(simulated / "dataset.csv")
    assert run("fit", out, "--dataset", data, "--theory-defaults", "--theory-mode", "pinned") == 0
    manifest = read_json(out, "manifest.json")
    assert manifest["theory"]["branch"] in ("many-replicates", "few-replicates")
    assert manifest["penalty"]["lambda"] == manifest["theory"]["lam"]
    assert manifest["penalty"]["beta"] == manifest["penalty"]["lambda"]


def test_fit_with_an_edge_target(simulated, tmp_path):
    out = tmp_path / "target"
    data = str(simulated / "dataset.csv")
    assert run("fit", out, "--dataset", data, "--gamma", "0.05", "--tie-beta", "--target-edges", "0") == 0
    manifest = read_json(out, "manifest.json")
    assert manifest["target_hit"] is True
    assert manifest["edges"] == 0


def test_missing_penalties_are_usage_errors(simulated, tmp_path):
    assert run("fit", tmp_path / "bad", "--dataset", str(simulated / "dataset.csv"), "--lambda", "0.1") == 2
    assert run("fit", tmp_path / "bad", "--dataset", str(tmp_path / "absent.csv"), "--lambda", "0.1") == 2


def test_non_numeric_cell_is_a_dataset_error(tmp_path):
    path = tmp_path / "text.csv"
    path.write_text("subject,time,v1,v2\n1,1,0.5,abc\n1,2,0.1,0.2\n", encoding="utf-8")
    args = ("--dataset", str(path), "--lambda", "0.1", "--beta", "0.1", "--gamma", "0.1")
    assert run("fit", tmp_path / "out", *args) == 2


def test_unknown_scenario_exits_with_usage_code(tmp_path):
    with pytest.raises(SystemExit) as caught:
        run("simulate", tmp_path, "--scenario", "ar7")
    assert caught.value.code == 2


def test_path_writes_one_row_per_lambda(simulated, tmp_path):
    out = tmp_path / "path"
    code = run(
        "path",
        out,
        "--dataset",
        str(simulated / "dataset.csv"),
        "--grid-lambda",
        "log:0.01:1:10",
        "--beta",
        "0.02",
        "--gamma",
        "1",
        "--truth",
        str(simulated / "truth_edges.csv"),
    )
    assert code == 0
    roc = pd.read_csv(out / "roc.csv")
    assert list(roc.columns) == ["lambda", "beta", "gamma", "edges", "tpr", "fpr"]
    assert len(roc) == 10
    assert roc["lambda"].is_monotonic_decreasing
    assert (roc["beta"] == 0.02).all()
    auc = read_json(out, "auc.json")
    assert auc["points"] == 10


def test_tune_selects_the_smallest_es(simulated, tmp_path):
    out = tmp_path / "tune"
    data = str(simulated / "dataset.csv")
    assert run("tune", out, "--dataset", data, "--grid-lambda", "0.02,0.2", "--gamma", "0.05", "--folds", "2") == 0
    report = read_json(out, "es_report.json")
    finite = [value for value in report["es"] if value is not None]
    assert report["es"][report["selected_index"]] == min(finite)
    assert read_json(out, "manifest.json")["grid_size"] == 2


def test_tune_needs_a_gamma(simulated, tmp_path):
    assert run("tune", tmp_path / "tune", "--dataset", str(simulated / "dataset.csv"), "--grid-lambda", "0.1") == 2


def test_eval_of_the_truth_is_perfect(simulated, tmp_path):
    truth = dataset_io.read_edge_list_csv(str(simulated / "truth_edges.csv"), p=5)
    estimate = write_graph_json(GraphEstimate(p=5, edges=truth, rule=Rule.UNION), str(tmp_path / "graph.json"))
    other = write_graph_json(GraphEstimate(p=5, edges=set(), rule=Rule.UNION), str(tmp_path / "empty.json"))
    out = tmp_path / "eval"
    truth_file = str(simulated / "truth_edges.csv")
    assert run("eval", out, "--estimate", estimate, "--truth", truth_file, "--reference", other) == 0
    score = read_json(out, "score.json")
    if truth:
        assert score["tpr"] == 1.0
    assert score["fpr"] == 0.0
    difference = read_json(out, "difference.json")
    assert difference["only_in_reference"] == []
    assert len(difference["only_in_estimate"]) == len(truth)


def test_eval_needs_inputs(tmp_path):
    assert run("eval", tmp_path / "eval") == 2


def test_runner_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("REPGRAPH_THREADS", "2")
    runner = RepgraphRunner(["eval", "--out-dir", str(tmp_path)])
    assert runner.args["threads"] == 2
    assert runner.args["command"] == "eval"
