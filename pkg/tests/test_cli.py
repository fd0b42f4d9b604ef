import csv
import json

import numpy as np
import pytest
from scipy.signal import find_peaks

from rgbspo2 import cli, config, features, ingest, regress
from rgbspo2.features import FeatureRow, FeatureSet


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_trace_preset(tmp_path):
    assert run("synth", "--out-dir", tmp_path, "--duration", 90, "--sessions", 2, "--seed", 3) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert len(man["sessions"]) == 2 and man["blur"] is None
    truth = read_csv(tmp_path / "p00_s0_truth.csv")
    s = np.array([float(r["spo2"]) for r in truth])
    assert find_peaks(-s, prominence=3)[0].size == 3


def test_synth_seed_changes_only_noise(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("synth", "--out-dir", a, "--duration", 20, "--seed", 1) == 0
    assert run("synth", "--out-dir", b, "--duration", 20, "--seed", 2) == 0
    assert (a / "p00_s0_truth.csv").read_text() == (b / "p00_s0_truth.csv").read_text()
    assert (a / "p00_s0_ref.csv").read_text() == (b / "p00_s0_ref.csv").read_text()
    ta, tb = ingest.load_trace(a / "p00_s0_trace.csv"), ingest.load_trace(b / "p00_s0_trace.csv")
    d = ta.matrix - tb.matrix
    assert np.abs(d).max() > 0
    # same noiseless component: the difference is zero-mean noise
    assert np.abs(d.mean(axis=1)).max() < 0.1 * d.std()


def test_synth_blur_preset(tmp_path):
    assert run("synth", "--out-dir", tmp_path, "--duration", 12, "--preset", "blur_sigma1.1") == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["blur"] == {"sigma": 1.1, "support": 5}
    assert man["sessions"][0]["frames"] == "p00_s0.rgb"
    assert len(ingest.load_frames(tmp_path / "p00_s0.rgb")) == 360


def test_synth_rejects_zero_sessions(tmp_path, capsys):
    assert run("synth", "--out-dir", tmp_path, "--sessions", 0) == 2
    assert "error[validation]" in capsys.readouterr().err


def test_extract_from_frames(tmp_path):
    src = tmp_path / "src"
    assert run("synth", "--out-dir", src, "--duration", 24, "--frames") == 0
    out = tmp_path / "out"
    assert run("extract", "--frames", src / "p00_s0.rgb", "--reference", src / "p00_s0_ref.csv",
               "--out-dir", out) == 0
    assert (out / "trace.csv").exists()
    rep = json.loads((out / "extract_report.json").read_text())
    plan = features.plan_windows(rep["duration"], 30.0)
    # 24 s minus the 1.8 s oximeter delay
    assert rep["windows"] == plan.L == 13
    rows = FeatureSet.from_csv(out / "features.csv")
    assert len(rows) + len(rep["skipped"]) == plan.L
    assert rows.labelled


def test_extract_trace_skips_roi(tmp_path):
    src = tmp_path / "src"
    run("synth", "--out-dir", src, "--duration", 30)
    out = tmp_path / "out"
    assert run("extract", "--trace", src / "p00_s0_trace.csv", "--out-dir", out, "--tracker", "peak") == 0
    assert not (out / "trace.csv").exists()
    assert {"features.csv", "hr.csv", "rppg.csv", "extract_report.json"} <= {p.name for p in out.iterdir()}
    assert read_csv(out / "hr.csv")[0]["method"] == "peak"
    assert not FeatureSet.from_csv(out / "features.csv").labelled


def test_missing_config_key(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"windows": {"window": 10.0}}))
    code = run("extract", "--trace", tmp_path / "x.csv", "--config", tmp_path / "c.json")
    assert code == 2
    assert "windows.step" in capsys.readouterr().err


def _linear_features(path, n=60, seed=0):
    r = np.random.default_rng(seed)
    F = r.uniform(0.5, 2.0, size=(n, 6))
    y = 90 + F @ np.array([1.0, -0.5, 2.0, 0.3, 1.2, -0.7])
    rows = [FeatureRow(i, i + 5.0, *F[i], label=float(y[i])) for i in range(n)]
    FeatureSet(rows).to_csv(path)
    return F, y


def _smooth1_config(path, regressor="ridge"):
    d = {"regress": dict(config.DEFAULTS["regress"], smooth=1, regressor=regressor)}
    path.write_text(json.dumps(d))
    return path


def test_train_exact_linear(tmp_path):
    _linear_features(tmp_path / "f.csv")
    cfgp = _smooth1_config(tmp_path / "c.json")
    assert run("train", "--features", tmp_path / "f.csv", "--config", cfgp, "--out-dir", tmp_path / "m") == 0
    rep = json.loads((tmp_path / "m" / "cv_report.json").read_text())
    assert rep["train"]["mae"] <= 1e-6
    assert len(rep["grid"]) == len(regress.DEFAULT_LAMBDA_GRID)
    assert all("cv_mae" in c for c in rep["grid"])


def test_train_rerun_bit_identical(tmp_path):
    _linear_features(tmp_path / "f.csv")
    for d in ("a", "b"):
        assert run("train", "--features", tmp_path / "f.csv", "--regressor", "svr",
                   "--out-dir", tmp_path / d, "--seed", 5) == 0
    assert (tmp_path / "a" / "model.json").read_bytes() == (tmp_path / "b" / "model.json").read_bytes()
    rep = json.loads((tmp_path / "a" / "cv_report.json").read_text())
    assert len(rep["grid"]) == len(regress.DEFAULT_C_GRID) * len(regress.DEFAULT_GAMMA_GRID)


def test_train_needs_labels(tmp_path, capsys):
    rows = [FeatureRow(i, i + 5.0, 1, 1, 1, 1, 1, 1) for i in range(20)]
    FeatureSet(rows).to_csv(tmp_path / "f.csv")
    assert run("train", "--features", tmp_path / "f.csv", "--out-dir", tmp_path) == 3
    assert "error[" in capsys.readouterr().err


def test_predict_and_evaluate_round_trip(tmp_path):
    F, y = _linear_features(tmp_path / "f.csv")
    y = y + np.random.default_rng(1).normal(0, 0.5, y.size)
    FeatureSet([FeatureRow(i, i + 5.0, *F[i], label=float(y[i])) for i in range(y.size)]).to_csv(tmp_path / "f.csv")
    assert run("train", "--features", tmp_path / "f.csv", "--regressor", "ridge", "--out-dir", tmp_path) == 0
    assert run("predict", "--model", tmp_path / "model.json", "--features", tmp_path / "f.csv",
               "--out-dir", tmp_path) == 0
    preds = read_csv(tmp_path / "predictions.csv")
    assert len(preds) == y.size
    model = regress.load_model(tmp_path / "model.json")
    direct = regress.predict(model, FeatureSet.from_csv(tmp_path / "f.csv").rows)
    np.testing.assert_array_equal([float(p["spo2"]) for p in preds], direct.spo2)
    assert run("evaluate", "--predictions", tmp_path / "predictions.csv", "--out-dir", tmp_path) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    train = json.loads((tmp_path / "cv_report.json").read_text())["train"]
    assert metrics["mae"] == pytest.approx(train["mae"], abs=1e-12)
    assert metrics["rho"] == pytest.approx(train["rho"], abs=1e-12)


def test_evaluate_with_reference(tmp_path):
    (tmp_path / "p.csv").write_text("i,t_center,spo2,raw,label\n0,5.0,95,95,\n1,6.0,96,96,\n2,7.0,98,98,\n")
    ingest.save_reference(ingest.ReferenceTrace(1.0, np.arange(10.0) + 90), tmp_path / "r.csv")
    assert run("evaluate", "--predictions", tmp_path / "p.csv", "--reference", tmp_path / "r.csv",
               "--out-dir", tmp_path) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert m["mae"] == pytest.approx(np.mean([0, 0, 1]))
    assert run("evaluate", "--predictions", tmp_path / "p.csv", "--out-dir", tmp_path) == 3


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("cohort")
    assert run("synth", "--out-dir", d, "--participants", 2, "--sessions", 2, "--duration", 60) == 0
    return d / "manifest.json"


def test_ablate_all_rows(manifest, tmp_path):
    assert run("ablate", "--manifest", manifest, "--regressor", "ridge", "--out-dir", tmp_path) == 0
    lines = (tmp_path / "ablation.txt").read_text().splitlines()
    assert [l.split()[0] for l in lines[1:]] == ["I", "II", "III", "IV", "V", "proposed"]
    assert lines[0].split() == ["method", "train_mae", "train_rho", "test_mae", "test_rho"]
    data = json.loads((tmp_path / "ablation.json").read_text())
    assert list(data) == ["I", "II", "III", "IV", "V", "proposed"]


def test_ablate_ordering_deterministic(manifest, tmp_path):
    assert run("ablate", "--manifest", manifest, "--regressor", "ridge", "--methods", "proposed,I",
               "--out-dir", tmp_path) == 0
    rows = (tmp_path / "ablation.txt").read_text().splitlines()[1:]
    assert [r.split()[0] for r in rows] == ["I", "proposed"]


def test_evaluate_manifest_modes(manifest, tmp_path):
    for mode in ("ps", "losesso", "loparto"):
        assert run("evaluate", "--manifest", manifest, "--mode", mode, "--regressor", "ridge",
                   "--out-dir", tmp_path / mode) == 0
        assert json.loads((tmp_path / mode / "metrics.json").read_text())["n"] > 0


def test_global_flags_after_subcommand(tmp_path):
    assert run("synth", "--duration", 12, "--out-dir", tmp_path, "-v") == 0
    assert (tmp_path / "manifest.json").exists()


def test_bad_manifest(tmp_path, capsys):
    (tmp_path / "m.json").write_text("{}")
    assert run("ablate", "--manifest", tmp_path / "m.json", "--out-dir", tmp_path) == 3
