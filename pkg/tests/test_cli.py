import json

import pytest

from fgpd.cli import main

FAST = {"c_grid": [1.0, 8.0], "gamma_grid": [0.001953125, 0.03125], "cv_folds": 3}


@pytest.fixture(scope="module")
def trained(small_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    cfg = out / "fast.json"
    cfg.write_text(json.dumps(FAST))
    code = main(["train", "--manifest", str(small_corpus["train"]), "--config", str(cfg),
                 "--seed", "2", "--out", str(out / "model")])
    assert code == 0
    return out, cfg


def test_config_command(tmp_path, capsys):
    assert main(["config", "--out", str(tmp_path / "c.json")]) == 0
    assert json.loads((tmp_path / "c.json").read_text())["n_components"] == 16


def test_synth_command(tmp_path, capsys):
    assert main(["synth", "--n-train", "4", "--n-test", "2", "--seed", "1", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "train.csv").read_text().splitlines()
    assert lines[0] == "path,label" and len(lines) == 5
    assert "train=" in capsys.readouterr().out


def test_train_writes_bundle(trained, capsys):
    out, _ = trained
    bundle = json.loads((out / "model" / "model.json").read_text())
    assert bundle["format_version"] == 1 and bundle["config"]["seed"] == 2


def test_extract_and_predict(trained, small_corpus, tmp_path, capsys):
    out, cfg = trained
    assert main(["extract", "--manifest", str(small_corpus["test"]), "--config", str(cfg),
                 "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "features.csv").read_text().splitlines()
    assert len(rows) == 21 and rows[0].startswith("path,label,mean,std,skewness,kurtosis")
    assert main(["predict", "--bundle", str(out / "model" / "model.json"), "--manifest",
                 str(small_corpus["test"]), "--out", str(tmp_path)]) == 0
    preds = (tmp_path / "predictions.csv").read_text().splitlines()
    assert len(preds) == 21


def test_predict_failure_exit_code(trained, tmp_path, capsys):
    out, _ = trained
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"garbage")
    assert main(["predict", "--bundle", str(out / "model" / "model.json"), str(bad),
                 "--out", str(tmp_path)]) == 1


def test_evaluate_reports(trained, small_corpus, tmp_path, capsys):
    out, _ = trained
    model = str(out / "model" / "model.json")
    assert main(["evaluate", "--bundle", model, "--manifest", str(small_corpus["test"]),
                 "--out", str(tmp_path)]) == 0
    text = (tmp_path / "metrics.txt").read_text()
    assert "acc=" in text and "auc=" in text and "warning=" not in text
    assert (tmp_path / "roc.csv").exists()
    with pytest.warns(UserWarning):
        assert main(["evaluate", "--bundle", model, "--manifest", str(small_corpus["train"]),
                     "--out", str(tmp_path / "self")]) == 0
    assert "warning=" in (tmp_path / "self" / "metrics.txt").read_text()


def test_ablation_command(trained, small_corpus, tmp_path, capsys):
    _, cfg = trained
    assert main(["ablation", "--train", str(small_corpus["train"]), "--test", str(small_corpus["test"]),
                 "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "ablation.csv").read_text().splitlines()
    assert len(rows) == 7
    assert [r.split(",")[0] for r in rows[1:]] == ["stat", "hog", "hog+blob", "stat+hog", "stat+blob",
                                                  "stat+hog+blob"]
    assert "Acc (%)" in capsys.readouterr().out


def test_inspect_command(small_corpus, tmp_path, capsys):
    assert main(["inspect", "--manifest", str(small_corpus["test"]), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "diagonal_fake.csv").exists() and (tmp_path / "blobs.csv").exists()


def test_errors_exit_two(tmp_path, capsys):
    assert main(["train", "--manifest", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2
    (tmp_path / "bad.json").write_text(json.dumps({"cv_folds": 1}))
    (tmp_path / "m.csv").write_text("path,label\n")
    assert main(["train", "--manifest", str(tmp_path / "m.csv"), "--config", str(tmp_path / "bad.json"),
                 "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
