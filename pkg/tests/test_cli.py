import subprocess
import sys

import numpy as np
import pytest

from autoeval.cli import main
from autoeval.config import dump_config
from autoeval.formats import read_classifier, sha256_file, write_bundle
from autoeval.classifier import FeatureBundle
from autoeval.harness import Workbench

from conftest import small_config


@pytest.fixture(scope="module")
def cfg_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.ini"
    path.write_text(dump_config(small_config()))
    return path


@pytest.fixture(scope="module")
def fitted(cfg_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["fit", "--config", str(cfg_file), "--out-dir", str(out)]) == 0
    return out


def test_print_defaults(capsys):
    assert main(["print-defaults"]) == 0
    text = capsys.readouterr().out
    assert "[glyphs]" in text and "meta_size = 200" in text


def test_synth_is_idempotent(cfg_file, tmp_path, capsys):
    args = ["synth", "--config", str(cfg_file), "--out-dir", str(tmp_path), "--porcelain"]
    assert main(args) == 0
    first = capsys.readouterr().out.strip().split("\t")
    manifest = tmp_path / "meta" / "manifest.jsonl"
    assert first[0] == "manifest" and int(first[2]) == 12
    assert len(manifest.read_text().splitlines()) == 12
    h1 = sha256_file(manifest)
    assert main(args) == 0
    second = capsys.readouterr().out.strip().split("\t")
    assert second == first and sha256_file(manifest) == h1


def test_missing_backgrounds_exit_code(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[backgrounds]\nprocedural = false\n")
    assert main(["synth", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2


def test_unknown_config_file(tmp_path):
    assert main(["synth", "--config", str(tmp_path / "missing.ini")]) == 2


def test_train_classifier(cfg_file, tmp_path, capsys):
    assert main(["train-classifier", "--config", str(cfg_file), "--out-dir", str(tmp_path), "--porcelain"]) == 0
    fields = capsys.readouterr().out.strip().split("\t")
    assert fields[0] == "classifier" and fields[2] == sha256_file(tmp_path / "classifier.aecl")
    assert read_classifier(tmp_path / "classifier.aecl").n_classes == 4


def _bundle_for_record(out, cfg, index, labels):
    bench = Workbench(cfg, clf=read_classifier(out / "classifier.aecl"))
    (rec, bundle), = bench.records(0, [index])
    return rec, FeatureBundle(bundle.features, bundle.softmax, bundle.labels if labels else None, rec.id)


def test_predict_with_truth(fitted, cfg_file, tmp_path, capsys):
    cfg = small_config()
    rec, bundle = _bundle_for_record(fitted, cfg, 1, labels=True)
    path = write_bundle(tmp_path / "train1.aefb", bundle)
    assert main(["predict", str(path), "--checkpoint", str(fitted), "--with-truth", "--porcelain"]) == 0
    name, est, truth, err = capsys.readouterr().out.strip().split("\t")
    assert float(truth) == pytest.approx(rec.accuracy, abs=1e-6)
    assert float(err) == pytest.approx(abs(float(est) - float(truth)), abs=2e-6)


def test_predict_unlabeled(fitted, tmp_path, capsys):
    rec, bundle = _bundle_for_record(fitted, small_config(), 2, labels=False)
    path = write_bundle(tmp_path / "u.aefb", bundle)
    assert main(["predict", str(path), "--checkpoint", str(fitted), "--with-truth", "--porcelain"]) == 0
    fields = capsys.readouterr().out.strip().split("\t")
    assert len(fields) == 2 and 0 <= float(fields[1]) <= 1
    assert main(["predict", str(path), "--checkpoint", str(fitted), "--method", "linear"]) == 0
    assert "estimated accuracy" in capsys.readouterr().out


def test_predict_bad_bundle(fitted, tmp_path):
    bad = tmp_path / "bad.aefb"
    bad.write_bytes(b"AEFB\x01")
    assert main(["predict", str(bad), "--checkpoint", str(fitted)]) == 2


def test_eval_writes_reports(fitted, cfg_file, capsys):
    code = main(["eval", "--config", str(cfg_file), "--out-dir", str(fitted), "--porcelain"])
    assert code in (0, 4)
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("rho\t")
    assert all(len(line.split("\t")) == 4 for line in lines[1:])
    for name in ("comparison.jsonl", "comparison.txt", "robustness.jsonl", "scatter.txt", "comparison.runtime.json"):
        assert (fitted / name).exists()
    assert np.loadtxt(fitted / "scatter.txt").shape == (12, 2)


def test_eval_threshold_violation_exit_code(fitted, cfg_file, tmp_path):
    strict = tmp_path / "strict.ini"
    strict.write_text(cfg_file.read_text().replace("max_neural_rmse = 0.1", "max_neural_rmse = 0.0"))
    assert main(["eval", "--config", str(strict), "--out-dir", str(fitted)]) == 4


def test_ablate(fitted, cfg_file, capsys):
    relaxed = fitted / "relaxed.ini"
    text = cfg_file.read_text().replace("max_linear_spread = 0.05", "max_linear_spread =")
    relaxed.write_text(text)
    code = main(["ablate", "--config", str(relaxed), "--out-dir", str(fitted), "--porcelain"])
    assert code in (0, 4)
    rows = capsys.readouterr().out.strip().splitlines()
    assert [r.split("\t")[:2] for r in rows] == [["meta_size", "6"], ["meta_size", "12"], ["set_size", "20"], ["set_size", "40"]]
    assert (fitted / "ablation.txt").exists()


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "autoeval.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("synth", "train-classifier", "fit", "predict", "eval", "ablate", "print-defaults"):
        assert cmd in out.stdout


def test_requires_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
