import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sparsefm import bench
from sparsefm.cli import main
from sparsefm.dataio import load_dense_matrix, load_libsvm, load_model, save_dense_matrix, save_model
from sparsefm.kernels import FmModel
from sparsefm.penalty import exact_ti_factorization


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "gen"
    assert main(["gen", "--d-true", "6", "--blocks", "2", "--d-noise", "4", "--n", "60", "--seed", "3",
                 "--out", str(out)]) == 0
    return out


def test_gen_defaults_and_feature_setting(tmp_path):
    assert main(["gen", "--n", "10", "--out", str(tmp_path / "a")]) == 0
    W = load_dense_matrix(tmp_path / "a" / "w_true.txt")
    assert W.shape == (100, 100) and np.count_nonzero(W) == 360
    X, y = load_libsvm(tmp_path / "a" / "data.libsvm")
    assert X.shape == (10, 100)
    assert main(["gen", "--n", "10", "--blocks", "1", "--d-true", "20", "--d-noise", "80",
                 "--out", str(tmp_path / "b")]) == 0
    assert np.count_nonzero(load_dense_matrix(tmp_path / "b" / "w_true.txt")) == 190
    man = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man["command"] == "gen" and "data.libsvm" in man["artifacts"]


def test_gen_invalid_spec(tmp_path, capsys):
    assert main(["gen", "--d-true", "7", "--blocks", "2", "--out", str(tmp_path / "x")]) == 1
    assert "divisible" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def _train(dataset, out, *extra):
    return main(["train", "--data", str(dataset / "data.libsvm"), "--k", "3", "--lp", "0.01", "--epochs", "5",
                 "--out", str(out), *extra])


def test_train_outputs_and_determinism(dataset, tmp_path):
    assert _train(dataset, tmp_path / "a", "--reg", "ti", "--lpt", "0.01") == 0
    assert _train(dataset, tmp_path / "b", "--reg", "ti", "--lpt", "0.01") == 0
    a = (tmp_path / "a" / "model.json").read_text()
    assert a == (tmp_path / "b" / "model.json").read_text()
    hist = _csv(tmp_path / "a" / "history.csv")
    assert hist[0]["epoch"] == "0" and len(hist) >= 2
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert set(man["artifacts"]) == {"model.json", "history.csv", "manifest.json"}


def test_manifest_reruns_identically(dataset, tmp_path):
    assert _train(dataset, tmp_path / "a", "--reg", "cs", "--lpt", "0.05", "--loss", "logistic") == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    argv = man["argv"][1:]
    argv[argv.index("--out") + 1] = str(tmp_path / "b")
    assert main(argv) == 0
    assert (tmp_path / "a" / "model.json").read_text() == (tmp_path / "b" / "model.json").read_text()


def test_ti_at_zero_strength_is_l2(dataset, tmp_path):
    assert _train(dataset, tmp_path / "ti", "--reg", "ti", "--lpt", "0") == 0
    assert _train(dataset, tmp_path / "l2", "--reg", "l2") == 0
    a = load_model(tmp_path / "ti" / "model.json")
    b = load_model(tmp_path / "l2" / "model.json")
    assert np.array_equal(a.P, b.P) and np.array_equal(a.w, b.w) and a.bias == b.bias


def test_zero_epochs_writes_initial_model(dataset, tmp_path):
    assert _train(dataset, tmp_path / "z", "--epochs", "0", "--seed", "4") == 0
    m = load_model(tmp_path / "z" / "model.json")
    assert not m.w.any() and m.bias == 0.0 and 0 < np.std(m.P) < 0.05


@pytest.mark.parametrize("kind,reg", [("hofm", "ti"), ("hofm", "cs"), ("allsubsets", "ti"),
                                      ("allsubsets", "cs"), ("fm", "l1"), ("fm", "l21")])
def test_train_model_kinds(dataset, tmp_path, kind, reg):
    assert _train(dataset, tmp_path / "m", "--model-kind", kind, "--reg", reg, "--lpt", "0.01") == 0
    hyper = json.loads((tmp_path / "m" / "model.json").read_text())["hyperparameters"]
    expect = {("hofm", "ti"): "TI_M", ("hofm", "cs"): "CS_M", ("allsubsets", "ti"): "TI_ALL",
              ("allsubsets", "cs"): "CS_ALL"}.get((kind, reg), reg.upper())
    assert hyper["kind"] == expect


def test_train_usage_errors(dataset, tmp_path, capsys):
    assert _train(dataset, tmp_path / "x", "--model-kind", "allsubsets", "--reg", "l1") == 1
    assert _train(dataset, tmp_path / "x", "--model-kind", "hofm", "--solver", "sgd") == 1
    assert _train(dataset, tmp_path / "x", "--model-kind", "hofm", "--order", "50") == 1
    assert _train(dataset, tmp_path / "x", "--lp", "-1") == 1
    assert _train(dataset, tmp_path / "x", "--reg", "elastic") == 1
    assert main(["frobnicate"]) == 1
    assert main(["train", "--data", str(tmp_path / "missing.libsvm"), "--out", str(tmp_path / "y")]) == 2
    bad = tmp_path / "bad.libsvm"
    bad.write_text("1 2:abc\n")
    assert main(["train", "--data", str(bad), "--out", str(tmp_path / "y")]) == 2
    assert "line 1" in capsys.readouterr().err


def test_sgd_and_psgd_train(dataset, tmp_path):
    assert _train(dataset, tmp_path / "s", "--solver", "sgd") == 0
    assert _train(dataset, tmp_path / "p", "--solver", "psgd", "--reg", "ti", "--lpt", "0.01") == 0


def test_eval_support_and_counts(dataset, tmp_path, capsys):
    W = load_dense_matrix(dataset / "w_true.txt")
    save_model(FmModel(np.zeros(10), exact_ti_factorization(W)), tmp_path / "exact.json")
    assert main(["eval", "--data", str(dataset / "data.libsvm"), "--model", str(tmp_path / "exact.json"),
                 "--w-true", str(dataset / "w_true.txt"), "--out", str(tmp_path / "e.json")]) == 0
    res = json.loads((tmp_path / "e.json").read_text())
    assert res["estimation_error"] == 0.0 and res["f1"] == 1.0 and res["exact_recovery"] is True
    assert "rmse" in res
    save_model(FmModel(np.zeros(10), np.zeros((10, 2))), tmp_path / "zero.json")
    capsys.readouterr()
    assert main(["eval", "--model", str(tmp_path / "zero.json"), "--metrics", "counts"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n_interactions"] == 0 and out["n_features"] == 0


def test_eval_errors_and_auc(dataset, tmp_path):
    assert _train(dataset, tmp_path / "m", "--loss", "logistic") == 0
    model = str(tmp_path / "m" / "model.json")
    assert main(["eval", "--model", model, "--metrics", "support"]) == 1
    assert main(["eval", "--model", model, "--metrics", "rmse"]) == 1
    assert main(["eval", "--model", model, "--metrics", "bogus"]) == 1
    data = str(dataset / "data.libsvm")
    assert main(["eval", "--model", model, "--data", data, "--metrics", "auc,rmse",
                 "--out", str(tmp_path / "r.json")]) == 0
    res = json.loads((tmp_path / "r.json").read_text())
    assert 0.5 < res["auc"] <= 1.0 and res["rmse"] > 0
    save_dense_matrix(np.zeros((3, 3)), tmp_path / "w3.txt")
    assert main(["eval", "--model", model, "--w-true", str(tmp_path / "w3.txt"), "--metrics", "support"]) == 2


def test_predict(dataset, tmp_path):
    assert _train(dataset, tmp_path / "m") == 0
    out = tmp_path / "pred.txt"
    assert main(["predict", "--data", str(dataset / "data.libsvm"), "--model", str(tmp_path / "m" / "model.json"),
                 "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 60


def test_bench_prox(tmp_path):
    assert main(["bench-prox", "--d-list", "8,64", "--trials", "3", "--out", str(tmp_path / "p")]) == 0
    rows = _csv(tmp_path / "p" / "prox_timing.csv")
    assert len(rows) == 2 * 3 * 2 * 3 * 2
    assert max(float(r["max_gap"]) for r in rows) <= 1e-12
    assert main(["bench-prox", "--trials", "0", "--out", str(tmp_path / "e")]) == 0
    text = (tmp_path / "e" / "prox_timing.csv").read_text()
    assert text.strip() == "d,lam,sigma,algo,trial,seconds,max_gap"
    assert main(["bench-prox", "--trials", "-1", "--out", str(tmp_path / "n")]) == 1


def test_bench_selection(tmp_path):
    assert main(["bench-selection", "--d", "20", "--k", "5", "--lambda-list", "0.01,100",
                 "--out", str(tmp_path / "s")]) == 0
    rows = _csv(tmp_path / "s" / "selection.csv")
    assert len(rows) == 8
    by = {(r["reg"], float(r["lam"])): (int(r["n_interactions"]), int(r["n_features"])) for r in rows}
    assert by[("L1", 0.01)] == (190, 20) and by[("L1", 100.0)] == (0, 0)
    assert by[("TI", 100.0)][0] == 0


def test_bench_recovery_smoke_and_aggregation(tmp_path):
    out = tmp_path / "r"
    assert main(["bench-recovery", "--setting", "feature", "--n-datasets", "1", "--n-val", "1", "--seeds", "1",
                 "--n-list", "40", "--reg-list", "ti,cs,l2", "--lambda-grid", "0.1,1", "--fm-grid", "0.1,1",
                 "--k", "4", "--time-budget", "0.2", "--out", str(out)]) == 0
    runs = _csv(out / "runs.csv")
    summary = _csv(out / "summary.csv")
    assert {r["split"] for r in runs} == {"val", "test"}
    assert len(summary) == 3 * 3
    # re-aggregate from the persisted per-run rows
    val = [_typed(r) for r in runs if r["split"] == "val"]
    for metric in bench.METRICS:
        chosen = bench.select_hyperparameters(val, metric)
        for method, (lp, lt) in chosen.items():
            row = next(s for s in summary if s["method"] == method and s["selected_by"] == metric)
            assert float(row["lam_p"]) == lp and float(row["lam_tilde"]) == lt
            test = [_typed(r) for r in runs if r["split"] == "test" and r["method"] == method
                    and float(r["lam_p"]) == lp and float(r["lam_tilde"]) == lt]
            assert float(row[metric]) == float(np.mean([t[metric] for t in test]))
    assert main(["bench-recovery", "--reg-list", "svm", "--out", str(out)]) == 1


def _typed(r):
    out = dict(r)
    for k in ("lam_p", "lam_tilde", "estimation_error", "f1", "exact_recovery"):
        out[k] = float(r[k])
    return out


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "sparsefm.cli", "bench-selection", "--d", "5", "--k", "2",
                          "--lambda-list", "1", "--out", str(tmp_path / "s")], capture_output=True, text=True)
    assert res.returncode == 0 and "features=" in res.stdout
    res = subprocess.run([sys.executable, "-m", "sparsefm.cli", "train"], capture_output=True, text=True)
    assert res.returncode == 1
