"""Metrics, the ablation matrix and the participant-specific / leave-out harness."""

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _io
from .errors import (
    ConfigError,
    LeakageError,
    MissingLabelError,
    ShapeError,
    UndefinedCorrelationError,
    ValidationError,
)
from .features import AcExtractorConfig, FeatureSet, feature_rows, plan_windows
from .pulse import PulseConfig, rppg_spectrogram, track
from .regress import FEATURE_NAMES, fit_select, predict
from .roi import RoiConfig, extract_trace

MODES = ("participant_specific", "leave_one_session_out", "leave_one_participant_out")
MODE_ALIASES = {"ps": MODES[0], "losesso": MODES[1], "loparto": MODES[2]}
METHOD_IDS = ("I", "II", "III", "IV", "V", "proposed")


def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ShapeError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ShapeError("need at least one sample")
    return y, yhat


def mae(y, yhat):
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def pearson(y, yhat):
    y, yhat = _pair(y, yhat)
    dy = y - y.mean()
    dh = yhat - yhat.mean()
    ny, nh = np.sqrt(dy @ dy), np.sqrt(dh @ dh)
    if ny <= 1e-12 * max(1.0, np.abs(y).max()) or nh <= 1e-12 * max(1.0, np.abs(yhat).max()):
        raise UndefinedCorrelationError("correlation is undefined for a constant sequence")
    return float(np.clip(dy @ dh / (ny * nh), -1.0, 1.0))


def pearson_or_nan(y, yhat):
    try:
        return pearson(y, yhat)
    except UndefinedCorrelationError:
        return float("nan")


# ---------------------------------------------------------------- configs

@dataclass(frozen=True)
class AblationConfig:
    method: str
    feature_names: Tuple[str, ...]
    ac: AcExtractorConfig
    tracker: Optional[str]

    @property
    def uses_tracker(self):
        return self.tracker is not None


def ablation_config(method):
    """The feature set, filter mode and HR tracker of one ablation row."""
    six = FEATURE_NAMES
    narrow = AcExtractorConfig(mode="narrow_abp")
    table = {
        "I": (("ratio_rb",), narrow, "dp"),
        "II": (six, AcExtractorConfig(mode="fixed_band", fixed_band=(1.0, 2.0)), None),
        "III": (six, AcExtractorConfig(mode="wide_abp"), "dp"),
        "IV": (six, narrow, "peak"),
        "V": (six, narrow, "weighted"),
        "proposed": (six, narrow, "dp"),
    }
    if method not in table:
        raise ConfigError(f"unknown ablation method {method!r}; expected one of {METHOD_IDS}")
    names, ac, tracker = table[method]
    return AblationConfig(method, tuple(names), ac, tracker)


# ---------------------------------------------------------------- sessions

@dataclass
class Session:
    """One recording with its provenance and a cache of derived signals.

    Either ``trace`` or ``frames`` must be given; with frames the ROI stage
    runs once on first access.
    """

    participant: str
    session: str
    reference: object
    trace: object = None
    frames: object = None
    side: str = "PU"
    skin_group: str = ""
    roi: RoiConfig = field(default_factory=RoiConfig)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.trace is None and self.frames is None:
            raise ValidationError(f"session {self.key} has neither trace nor frames")
        self.participant, self.session = str(self.participant), str(self.session)

    @property
    def key(self):
        return (self.participant, self.session)

    def rgb(self):
        if self.trace is None:
            self.trace = extract_trace(self.frames, self.roi)
        return self.trace

    def spectrogram(self, pulse_cfg):
        k = ("spec", pulse_cfg.pos_window, pulse_cfg.stft_window, pulse_cfg.stft_hop,
             pulse_cfg.fft_pad, pulse_cfg.band)
        if k not in self._cache:
            self._cache[k] = rppg_spectrogram(self.rgb(), pulse_cfg)[1]
        return self._cache[k]

    def hr_track(self, pulse_cfg, method):
        k = ("hr", method, pulse_cfg)
        if k not in self._cache:
            self._cache[k] = track(self.spectrogram(pulse_cfg), pulse_cfg, method)
        return self._cache[k]

    def features(self, ac_cfg, tracker, pulse_cfg=PulseConfig(), window=10.0, step=1.0):
        k = ("feat", ac_cfg, tracker, pulse_cfg, window, step)
        if k not in self._cache:
            trace = self.rgb()
            hr = self.hr_track(pulse_cfg, tracker) if tracker is not None else None
            plan = plan_windows(trace.duration, trace.fps, window, step)
            fs = feature_rows(trace, hr, self.reference, ac_cfg, plan)
            self._cache[k] = fs.with_source(self.participant, self.session)
        return self._cache[k]


# ---------------------------------------------------------------- reports

@dataclass
class MetricReport:
    mae: float
    rho: float
    n: int
    per_session: Dict[str, dict] = field(default_factory=dict)
    per_participant: Dict[str, dict] = field(default_factory=dict)
    mae_mean: float = float("nan")
    mae_std: float = float("nan")
    rho_mean: float = float("nan")
    rho_std: float = float("nan")
    train_mae: float = float("nan")
    train_rho: float = float("nan")
    label: str = ""

    def to_dict(self):
        return asdict(self)

    def to_json(self, path):
        _io.write_text(path, json.dumps(self.to_dict(), indent=1, default=float))

    def table(self):
        lines = [f"{'participant':>12} {'n':>6} {'mae':>8} {'rho':>8}"]
        for p, m in sorted(self.per_participant.items()):
            lines.append(f"{p:>12} {m['n']:>6d} {m['mae']:>8.3f} {m['rho']:>8.3f}")
        lines.append(f"{'pooled':>12} {self.n:>6d} {self.mae:>8.3f} {self.rho:>8.3f}")
        lines.append(f"{'mean(std)':>12} {'':>6} {self.mae_mean:>5.3f}({self.mae_std:.3f})"
                     f" {self.rho_mean:.3f}({self.rho_std:.3f})")
        return "\n".join(lines)


def _std(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    return float(np.std(x, ddof=1)) if x.size > 1 else float("nan")


def _mean(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    return float(np.mean(x)) if x.size else float("nan")


def build_report(results, train=None, label=""):
    """``results`` is a list of (participant, session, times, y, yhat)."""
    if not results:
        raise ValidationError("no test predictions to report")
    y = np.concatenate([r[3] for r in results])
    yhat = np.concatenate([r[4] for r in results])
    per_session = {}
    by_part: Dict[str, list] = {}
    for p, s, _, yy, hh in results:
        per_session[f"{p}/{s}"] = {"n": int(yy.size), "mae": mae(yy, hh),
                                   "rho": pearson_or_nan(yy, hh)}
        by_part.setdefault(p, []).append((yy, hh))
    per_part = {}
    for p, chunks in by_part.items():
        yy = np.concatenate([c[0] for c in chunks])
        hh = np.concatenate([c[1] for c in chunks])
        per_part[p] = {"n": int(yy.size), "mae": mae(yy, hh), "rho": pearson_or_nan(yy, hh)}
    rep = MetricReport(mae=mae(y, yhat), rho=pearson_or_nan(y, yhat), n=int(y.size),
                       per_session=per_session, per_participant=per_part,
                       mae_mean=_mean([m["mae"] for m in per_part.values()]),
                       mae_std=_std([m["mae"] for m in per_part.values()]),
                       rho_mean=_mean([m["rho"] for m in per_part.values()]),
                       rho_std=_std([m["rho"] for m in per_part.values()]), label=label)
    if train:
        ty = np.concatenate([r[3] for r in train])
        th = np.concatenate([r[4] for r in train])
        rep.train_mae, rep.train_rho = mae(ty, th), pearson_or_nan(ty, th)
    return rep


# ---------------------------------------------------------------- experiments

@dataclass
class ExperimentPlan:
    mode: str
    sessions: List[Session]

    def __post_init__(self):
        self.mode = MODE_ALIASES.get(str(self.mode).lower(), self.mode)
        if self.mode not in MODES:
            raise ConfigError(f"unknown experiment mode {self.mode!r}; expected one of {MODES}")
        keys = [s.key for s in self.sessions]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate (participant, session) in manifest")

    def participants(self):
        return sorted({s.participant for s in self.sessions})

    def splits(self):
        """(train sessions, test session) pairs.

        Every mode tests the last session of each participant, so the modes
        differ only in what they train on.
        """
        out = []
        for p in self.participants():
            own = [s for s in self.sessions if s.participant == p]
            test = own[-1]
            if self.mode == MODES[0]:
                train = own[:-1]
            elif self.mode == MODES[1]:
                train = [s for s in self.sessions if s is not test]
            else:
                train = [s for s in self.sessions if s.participant != p]
            if not train:
                raise ValidationError(f"participant {p}: no training sessions in {self.mode}")
            out.append((train, test))
        return out


def check_leakage(mode, train_rows, test_session):
    src = {r.source for r in train_rows}
    if test_session.key in src:
        raise LeakageError(f"test session {test_session.key} appears in its training set")
    if mode == MODES[2] and any(s[0] == test_session.participant for s in src):
        raise LeakageError(f"participant {test_session.participant} appears in its training set")


def session_predictions(model, fs: FeatureSet, reference, smooth=10):
    """Smoothed per-window predictions against the 1 Hz reference at window centres."""
    pred = predict(model, fs.rows, smooth)
    t = fs.times()
    return t, reference.value_at(t), pred.spo2


def run_experiment(plan, regressor="svr", ablation="proposed", pulse_cfg=PulseConfig(),
                   regress_cfg=None, smooth=10, window=10.0, step=1.0, with_train=False):
    abl = ablation if isinstance(ablation, AblationConfig) else ablation_config(ablation)
    if abl.uses_tracker:
        pulse_cfg = replace(pulse_cfg, tracker=abl.tracker)
    feats = lambda s: s.features(abl.ac, abl.tracker, pulse_cfg, window, step)
    results, train_res = [], []
    for train, test in plan.splits():
        rows = [r for s in train for r in feats(s).rows]
        check_leakage(plan.mode, rows, test)
        y = np.array([r.label if r.label is not None else np.nan for r in rows])
        if not np.all(np.isfinite(y)):
            raise MissingLabelError("training rows without a reference label")
        F = np.array([[getattr(r, n) for n in abl.feature_names] for r in rows])
        model = fit_select(F, y, regressor, regress_cfg, feature_names=abl.feature_names)
        t, yy, hh = session_predictions(model, feats(test), test.reference, smooth)
        results.append((test.participant, test.session, t, yy, hh))
        if with_train:
            for s in train:
                t, yy, hh = session_predictions(model, feats(s), s.reference, smooth)
                train_res.append((s.participant, s.session, t, yy, hh))
    return build_report(results, train_res or None, label=f"{plan.mode}/{abl.method}/{regressor}")


def run_ablation(sessions, method="proposed", mode="participant_specific", regressor="svr",
                 **kw):
    kw.setdefault("with_train", True)
    return run_experiment(ExperimentPlan(mode, list(sessions)), regressor, method, **kw)


def ablation_table(reports: Sequence[MetricReport], methods: Sequence[str]):
    lines = [f"{'method':>9} {'train_mae':>10} {'train_rho':>10} {'test_mae':>9} {'test_rho':>9}"]
    for m, r in zip(methods, reports):
        lines.append(f"{m:>9} {r.train_mae:>10.3f} {r.train_rho:>10.3f} {r.mae:>9.3f}"
                     f" {r.rho:>9.3f}")
    return "\n".join(lines)
