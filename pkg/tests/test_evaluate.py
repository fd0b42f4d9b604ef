import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rgbspo2 import evaluate, experiments
from rgbspo2.errors import ConfigError, LeakageError, UndefinedCorrelationError, ValidationError
from rgbspo2.evaluate import ExperimentPlan, Session
from rgbspo2.features import FeatureRow
from rgbspo2.ingest import ReferenceTrace, RgbTrace


def test_mae_examples():
    assert evaluate.mae([1, 2], [1, 2]) == 0
    assert evaluate.mae([90, 95], [92, 94]) == 1.5


@given(arrays(np.float64, 12, elements=st.floats(-100, 100)), arrays(np.float64, 12, elements=st.floats(-100, 100)))
def test_mae_naive(y, h):
    s = 0.0
    for a, b in zip(y, h):
        s += abs(a - b)
    assert abs(evaluate.mae(y, h) - s / len(y)) <= 1e-12 * max(1.0, s)


def test_pearson_examples():
    y = np.array([1.0, 4.0, 2.0, 8.0])
    assert evaluate.pearson(y, y) == pytest.approx(1.0)
    assert evaluate.pearson(y, -y + 2 * y.mean()) == pytest.approx(-1.0)
    assert evaluate.pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(9 / (2 * math.sqrt(21)))
    assert evaluate.pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9820, abs=1e-4)


def test_pearson_constant():
    with pytest.raises(UndefinedCorrelationError):
        evaluate.pearson([1, 2, 3], [5, 5, 5])
    assert math.isnan(evaluate.pearson_or_nan([1, 1], [1, 2]))


@given(arrays(np.float64, 10, elements=st.floats(-1e3, 1e3)), arrays(np.float64, 10, elements=st.floats(-1e3, 1e3)))
def test_pearson_bounds_and_symmetry(y, h):
    try:
        r = evaluate.pearson(y, h)
    except UndefinedCorrelationError:
        return
    assert -1 <= r <= 1
    assert evaluate.pearson(h, y) == pytest.approx(r, abs=1e-12)


def test_metric_shape_checks():
    with pytest.raises(ValidationError):
        evaluate.mae([1, 2], [1])


def test_ablation_matrix():
    cfg = {m: evaluate.ablation_config(m) for m in evaluate.METHOD_IDS}
    assert cfg["I"].feature_names == ("ratio_rb",)
    assert cfg["II"].ac.mode == "fixed_band" and cfg["II"].ac.fixed_band == (1.0, 2.0)
    assert cfg["III"].ac.mode == "wide_abp" and cfg["III"].ac.hbw == 0.5
    assert cfg["proposed"].ac.hbw == 0.1 and cfg["proposed"].tracker == "dp"
    assert len(cfg["proposed"].feature_names) == 6
    for m, tracker in (("IV", "peak"), ("V", "weighted")):
        assert cfg[m].tracker == tracker
        assert cfg[m].ac == cfg["proposed"].ac and cfg[m].feature_names == cfg["proposed"].feature_names
    with pytest.raises(ConfigError):
        evaluate.ablation_config("VI")


def _dummy_sessions(parts=3, sessions=2):
    tr = RgbTrace(30.0, np.ones(10), np.ones(10), np.ones(10))
    ref = ReferenceTrace(1.0, [97.0])
    return [Session(p, s, ref, trace=tr) for p in range(parts) for s in range(sessions)]


def test_splits_per_mode():
    S = _dummy_sessions()
    ps = ExperimentPlan("ps", S).splits()
    assert [(len(tr), te.key) for tr, te in ps] == [(1, ("0", "1")), (1, ("1", "1")), (1, ("2", "1"))]
    assert ps[0][0][0].key == ("0", "0")
    lo_s = ExperimentPlan("LOSessO", S).splits()
    assert all(len(tr) == 5 and te not in tr for tr, te in lo_s)
    lo_p = ExperimentPlan("leave_one_participant_out", S).splits()
    for tr, te in lo_p:
        assert len(tr) == 4 and all(s.participant != te.participant for s in tr)
    # every mode tests the same sessions
    assert [te.key for _, te in ps] == [te.key for _, te in lo_s] == [te.key for _, te in lo_p]


def test_plan_errors():
    with pytest.raises(ConfigError):
        ExperimentPlan("kfold", _dummy_sessions())
    with pytest.raises(ValidationError):
        ExperimentPlan("ps", _dummy_sessions(1, 1)).splits()
    S = _dummy_sessions()
    with pytest.raises(ValidationError):
        ExperimentPlan("ps", S + [S[0]])


def test_leakage_detector():
    S = _dummy_sessions()
    row = lambda p, s: FeatureRow(0, 5.0, 1, 1, 1, 1, 1, 1, source=(p, s))
    with pytest.raises(LeakageError):
        evaluate.check_leakage(evaluate.MODES[1], [row("0", "1")], S[1])
    with pytest.raises(LeakageError):
        evaluate.check_leakage(evaluate.MODES[2], [row("0", "0")], S[1])
    evaluate.check_leakage(evaluate.MODES[1], [row("0", "0")], S[1])


def test_build_report():
    res = [("a", "1", None, np.array([90.0, 92.0, 94.0]), np.array([91.0, 92.0, 95.0])),
           ("b", "1", None, np.array([96.0, 97.0]), np.array([96.0, 96.0]))]
    rep = evaluate.build_report(res)
    assert rep.n == 5
    assert rep.mae == pytest.approx(3 / 5)
    assert rep.per_participant["a"]["mae"] == pytest.approx(2 / 3)
    assert rep.mae_std == pytest.approx(np.std([2 / 3, 0.5], ddof=1))
    assert "pooled" in rep.table()


@pytest.fixture(scope="module")
def small_cohort():
    spec = experiments.CohortSpec(n_participants=3, duration=90.0)
    return experiments.cohort(7, spec)


def test_run_experiment_end_to_end(small_cohort, tmp_path):
    rep = evaluate.run_ablation(small_cohort, "proposed", regressor="ridge")
    # alignment drops the 1.8 s oximeter delay: 88.2 s leaves 79 windows per session
    assert rep.n == 3 * 79
    assert set(rep.per_participant) == {"0", "1", "2"}
    assert rep.mae < 3 and rep.rho > 0.5
    assert np.isfinite(rep.train_mae)
    rep.to_json(tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text())["n"] == rep.n


def test_modes_share_test_windows(small_cohort):
    reps = [evaluate.run_ablation(small_cohort, "proposed", mode=m, regressor="ridge", with_train=False)
            for m in evaluate.MODES]
    assert len({r.n for r in reps}) == 1
    assert set(reps[0].per_session) == set(reps[2].per_session) == {"0/1", "1/1", "2/1"}


def test_session_cache_reused(small_cohort):
    s = small_cohort[0]
    cfg = evaluate.ablation_config("proposed")
    a = s.features(cfg.ac, cfg.tracker)
    assert s.features(cfg.ac, cfg.tracker) is a
    assert all(r.source == ("0", "0") for r in a.rows)


def test_session_needs_input():
    with pytest.raises(ValidationError):
        Session("a", "1", ReferenceTrace(1.0, [97.0]))


def test_ablation_table_rows():
    r = evaluate.MetricReport(1.0, 0.5, 10, train_mae=0.5, train_rho=0.9)
    text = evaluate.ablation_table([r, r], ["I", "proposed"])
    lines = text.splitlines()
    assert len(lines) == 3 and lines[0].split() == ["method", "train_mae", "train_rho", "test_mae", "test_rho"]
