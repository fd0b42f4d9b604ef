"""Command-line entry point: extract, train, predict, evaluate, synth, ablate."""

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _io, evaluate, features, ingest, pulse, regress, roi, synth
from .config import load_config
from .errors import (
    InsufficientSamplesError,
    MissingLabelError,
    SchemaError,
    Spo2Error,
    ValidationError,
)

log = logging.getLogger("rgbspo2")

PRESETS = ("breathhold3", "blur_sigma1.1", "blur_sigma2.6")
FEATURE_SETS = {"six": regress.FEATURE_NAMES, "rb": ("ratio_rb",)}


def _dump(path, obj):
    _io.write_text(path, json.dumps(obj, indent=1, default=float) + "\n")


def _rows_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    _io.write_text(path, buf.getvalue())


def _out(args, name):
    return Path(args.out_dir) / name


def _config(args):
    cfg = load_config(args.config)
    for section, key, attr in (("pulse", "tracker", "tracker"),
                               ("features", "mode", "ac_mode"),
                               ("regress", "regressor", "regressor")):
        cfg.override(section, key, getattr(args, attr, None))
    return cfg


# ---------------------------------------------------------------- extract

def cmd_extract(args):
    cfg = _config(args)
    if args.frames:
        seq = ingest.load_frames(args.frames)
        trace = roi.extract_trace(seq, cfg.roi)
        ingest.save_trace(trace, _out(args, "trace.csv"))
    else:
        trace = ingest.load_trace(args.trace)
    ref = None
    if args.reference:
        ref = ingest.load_reference(args.reference)
        a = cfg["align"]
        aligned = ingest.align(trace, ref, a["video_lead"], a["oximeter_delay"])
        trace, ref = aligned.trace, aligned.reference
    pc = cfg.pulse
    sig, spec = pulse.rppg_spectrogram(trace, pc)
    ac = cfg.ac
    hr = pulse.track(spec, pc)
    w = cfg["windows"]
    plan = features.plan_windows(trace.duration, trace.fps, w["window"], w["step"])
    f = cfg["features"]
    fs = features.feature_rows(trace, hr, ref, ac, plan, f["dc_order"], f["dc_cutoff"])
    fs.to_csv(_out(args, "features.csv"))
    hr.to_csv(_out(args, "hr.csv"))
    t = trace.t0 + np.arange(sig.samples.size) / sig.fps
    _rows_csv(_out(args, "rppg.csv"), ("t", "rppg"),
              ([repr(float(a)), repr(float(b))] for a, b in zip(t, sig.samples)))
    _dump(_out(args, "extract_report.json"),
          {"windows": plan.L, "rows": len(fs), "skipped": [list(s) for s in fs.skipped],
           "duration": trace.duration, "fps": trace.fps})
    log.info("extracted %d of %d windows", len(fs), plan.L)
    print(f"{len(fs)} feature rows ({len(fs.skipped)} skipped) -> {args.out_dir}")


# ---------------------------------------------------------------- train / predict

def _load_features(paths):
    rows = []
    for p in paths:
        rows.extend(features.FeatureSet.from_csv(p).rows)
    return features.FeatureSet(rows)


def _regress_cfg(cfg):
    r = cfg.regress
    return {k: r[k] for k in ("lambda_grid", "C_grid", "gamma_grid", "epsilon", "folds",
                              "cv_max_iter")}


def cmd_train(args):
    cfg = _config(args)
    fs = _load_features(args.features)
    if not fs.labelled:
        raise MissingLabelError("training features need a label in every row")
    if len(fs) < 10:
        raise InsufficientSamplesError(f"need at least 10 labelled rows, got {len(fs)}")
    names = FEATURE_SETS[args.feature_set]
    F, y = fs.matrix(names), fs.labels()
    rc = _regress_cfg(cfg)
    kind = cfg.regress["regressor"]
    if kind == "ridge":
        scores = regress.ridge_cv_scores(F, y, rc["lambda_grid"], rc["folds"])
        lam = regress.ridge_best(scores)
        model = regress.ridge_fit(F, y, lam, feature_names=names)
        cells = [{"lambda": k, "cv_mae": v} for k, v in scores.items()]
        chosen = {"lambda": lam}
    else:
        scores = regress.svr_cv_scores(F, y, rc["C_grid"], rc["gamma_grid"], rc["epsilon"],
                                       rc["folds"], max_iter=rc["cv_max_iter"])
        C, g = regress.svr_best(scores)
        model = regress.svr_fit(F, y, C, g, rc["epsilon"], feature_names=names)
        cells = [{"C": k[0], "gamma": k[1], "cv_mae": v} for k, v in scores.items()]
        chosen = {"C": C, "gamma": g}
    pred = regress.predict(model, fs.rows, cfg.regress["smooth"])
    train = {"mae": evaluate.mae(y, pred.spo2), "rho": evaluate.pearson_or_nan(y, pred.spo2),
             "n": int(y.size)}
    regress.save_model(model, _out(args, "model.json"), extra={"selected": chosen})
    _dump(_out(args, "cv_report.json"), {"regressor": kind, "folds": rc["folds"],
                                         "selected": chosen, "grid": cells, "train": train})
    print(f"{kind} {chosen} train MAE {train['mae']:.3f} rho {train['rho']:.3f}")


def cmd_predict(args):
    cfg = _config(args)
    model = regress.load_model(args.model)
    fs = _load_features(args.features)
    pred = regress.predict(model, fs.rows, cfg.regress["smooth"])
    _rows_csv(_out(args, "predictions.csv"), ("i", "t_center", "spo2", "raw", "label"),
              ([r.i, repr(r.t_center), repr(float(s)), repr(float(raw)),
                "" if r.label is None else repr(float(r.label))]
               for r, s, raw in zip(fs.rows, pred.spo2, pred.raw)))
    print(f"{len(fs)} predictions ({pred.n_clamped} clamped) -> {args.out_dir}")


# ---------------------------------------------------------------- evaluate / ablate

def _load_predictions(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"t_center", "spo2"} <= set(reader.fieldnames or []):
            raise SchemaError(f"{path}: prediction CSV needs t_center and spo2 columns")
        recs = list(reader)
    t = np.array([float(r["t_center"]) for r in recs])
    yhat = np.array([float(r["spo2"]) for r in recs])
    lab = [r.get("label", "") for r in recs]
    y = np.array([float(v) if v else np.nan for v in lab])
    return t, yhat, y


def load_manifest(path, roi_cfg=None):
    path = Path(path)
    try:
        d = json.loads(path.read_text())
        entries = d["sessions"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: not a session manifest ({exc})") from None
    sessions = []
    for e in entries:
        for k in ("participant", "session", "reference"):
            if k not in e:
                raise SchemaError(f"{path}: manifest entry lacks {k!r}")
        if "trace" not in e and "frames" not in e:
            raise SchemaError(f"{path}: manifest entry needs 'trace' or 'frames'")
        ref = ingest.load_reference(path.parent / e["reference"])
        trace = ingest.load_trace(path.parent / e["trace"]) if "trace" in e else None
        frames = ingest.load_frames(path.parent / e["frames"]) if trace is None else None
        if frames is not None:
            trace = roi.extract_trace(frames, roi_cfg or roi.RoiConfig())
        al = ingest.align(trace, ref, float(e.get("video_lead", 0.0)),
                          float(e.get("oximeter_delay", ingest.OXIMETER_DELAY)))
        sessions.append(evaluate.Session(e["participant"], e["session"], al.reference,
                                         trace=al.trace, side=e.get("side", "PU"),
                                         skin_group=e.get("skin_group", "")))
    if not sessions:
        raise SchemaError(f"{path}: manifest lists no sessions")
    return sessions


def _experiment_kw(cfg):
    w = cfg["windows"]
    return dict(pulse_cfg=cfg.pulse, regress_cfg=_regress_cfg(cfg),
                smooth=cfg.regress["smooth"], window=w["window"], step=w["step"])


def cmd_evaluate(args):
    cfg = _config(args)
    if args.manifest:
        sessions = load_manifest(args.manifest, cfg.roi)
        plan = evaluate.ExperimentPlan(args.mode, sessions)
        rep = evaluate.run_experiment(plan, cfg.regress["regressor"], args.method,
                                      **_experiment_kw(cfg))
    else:
        if not args.predictions:
            raise ValidationError("evaluate needs --predictions or --manifest")
        t, yhat, y = _load_predictions(args.predictions)
        if args.reference:
            y = ingest.load_reference(args.reference).value_at(t)
        if not np.all(np.isfinite(y)):
            raise MissingLabelError("predictions lack labels; pass --reference")
        rep = evaluate.build_report([("-", "-", t, y, yhat)], label="predictions")
    rep.to_json(_out(args, "metrics.json"))
    _io.write_text(_out(args, "metrics.txt"), rep.table() + "\n")
    print(rep.table())


def cmd_ablate(args):
    cfg = _config(args)
    sessions = load_manifest(args.manifest, cfg.roi)
    methods = list(evaluate.METHOD_IDS) if args.methods == "all" else args.methods.split(",")
    for m in methods:
        evaluate.ablation_config(m)
    methods = sorted(methods, key=evaluate.METHOD_IDS.index)
    reports = []
    for m in methods:
        log.info("ablation %s", m)
        reports.append(evaluate.run_ablation(sessions, m, args.mode, cfg.regress["regressor"],
                                             **_experiment_kw(cfg)))
    table = evaluate.ablation_table(reports, methods)
    _dump(_out(args, "ablation.json"), {m: r.to_dict() for m, r in zip(methods, reports)})
    _io.write_text(_out(args, "ablation.txt"), table + "\n")
    print(table)


# ---------------------------------------------------------------- synth

def _synth_session(args, scene, s_rng, n_rng, blur):
    truth = synth.breath_hold_truth(args.duration, args.fps, n_dips=args.dips,
                                    nadir=(89.0, 91.0), baseline=(97.5, 99.0),
                                    hr_base=s_rng.uniform(60, 85), rng=s_rng)
    phase0 = s_rng.uniform(0, 2 * np.pi)
    trace, _ = synth.generate_trace(scene, truth, args.snr, rng=n_rng, phase0=phase0)
    ref = synth.reference_from_truth(truth, delay=ingest.OXIMETER_DELAY)
    frames = None
    if args.frames or blur:
        frames = synth.render_frames(trace, args.width, args.height, rng=n_rng,
                                     shading=args.shading, skin_texture=args.skin_texture)
        if blur:
            frames = synth.gaussian_blur(frames, *blur)
    return truth, trace, ref, frames


def cmd_synth(args):
    blur = synth.BLUR_PRESETS.get(args.preset)
    if args.blur_sigma is not None:
        blur = (args.blur_sigma, args.blur_support)
    s_rng = np.random.default_rng(args.scene_seed)
    n_rng = np.random.default_rng(args.seed)
    base = synth.load_scene(args.scene) if args.scene else synth.default_scene()
    entries = []
    for p in range(args.participants):
        scene = base if args.participants == 1 else synth.participant_scene(s_rng)
        for s in range(args.sessions):
            sc = synth.session_scene(scene, s_rng, args.session_jitter)
            truth, trace, ref, frames = _synth_session(args, sc, s_rng, n_rng, blur)
            stem = f"p{p:02d}_s{s}"
            e = {"participant": f"p{p:02d}", "session": f"s{s}", "reference": f"{stem}_ref.csv"}
            if frames is not None:
                ingest.write_frames(frames, _out(args, f"{stem}.rgb"))
                e["frames"] = f"{stem}.rgb"
            else:
                ingest.save_trace(trace, _out(args, f"{stem}_trace.csv"))
                e["trace"] = f"{stem}_trace.csv"
            ingest.save_reference(ref, _out(args, f"{stem}_ref.csv"))
            truth.to_csv(_out(args, f"{stem}_truth.csv"))
            entries.append(e)
    _dump(_out(args, "manifest.json"),
          {"preset": args.preset, "seed": args.seed, "scene_seed": args.scene_seed,
           "blur": None if blur is None else {"sigma": blur[0], "support": blur[1]},
           "sessions": entries})
    print(f"{len(entries)} synthetic session(s) -> {args.out_dir}")


# ---------------------------------------------------------------- parser

def _common(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=d(0), help="random seed")
    parser.add_argument("--out-dir", default=d("."), help="output directory")
    parser.add_argument("--verbose", "-v", action="store_true", default=d(False))


def build_parser():
    p = argparse.ArgumentParser(prog="rgbspo2", description=__doc__)
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        _common(sp, suppress=True)
        sp.set_defaults(func=fn)
        return sp

    sp = add("extract", cmd_extract, "ROI, rPPG/HR and feature extraction")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--frames", help="raw rgb8 frame file with a .json header")
    src.add_argument("--trace", help="RGB trace CSV (skips the ROI stage)")
    sp.add_argument("--reference", help="oximeter CSV; adds labels")
    sp.add_argument("--tracker", choices=pulse.TRACKERS)
    sp.add_argument("--ac-mode", choices=features.AC_MODES)

    sp = add("train", cmd_train, "fit ridge or SVR with grid search")
    sp.add_argument("--features", nargs="+", required=True)
    sp.add_argument("--regressor", choices=("ridge", "svr"))
    sp.add_argument("--feature-set", choices=sorted(FEATURE_SETS), default="six")

    sp = add("predict", cmd_predict, "apply a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", nargs="+", required=True)

    sp = add("evaluate", cmd_evaluate, "score predictions or run an experiment mode")
    sp.add_argument("--predictions")
    sp.add_argument("--reference")
    sp.add_argument("--manifest")
    sp.add_argument("--mode", default="participant_specific")
    sp.add_argument("--method", default="proposed", choices=evaluate.METHOD_IDS)
    sp.add_argument("--regressor", choices=("ridge", "svr"))
    sp.add_argument("--tracker", choices=pulse.TRACKERS)

    sp = add("synth", cmd_synth, "generate synthetic sessions")
    sp.add_argument("--preset", choices=PRESETS, default="breathhold3")
    sp.add_argument("--scene", help="scene JSON (default: built-in)")
    sp.add_argument("--scene-seed", type=int, default=0,
                    help="seed for scene, truth and pulse phase (noise uses --seed)")
    sp.add_argument("--participants", type=int, default=1)
    sp.add_argument("--sessions", type=int, default=1)
    sp.add_argument("--session-jitter", type=float, default=0.01)
    sp.add_argument("--duration", type=float, default=180.0)
    sp.add_argument("--fps", type=float, default=30.0)
    sp.add_argument("--dips", type=int, default=3)
    sp.add_argument("--snr", type=float, default=20.0, help="dB over pulsatile power")
    sp.add_argument("--frames", action="store_true", help="render frames instead of traces")
    sp.add_argument("--width", type=int, default=80)
    sp.add_argument("--height", type=int, default=60)
    sp.add_argument("--shading", type=float, default=0.0, help="rim darkening of the hand, [0, 1)")
    sp.add_argument("--skin-texture", type=float, default=0.0,
                    help="std (counts) of a static per-pixel skin pattern")
    sp.add_argument("--blur-sigma", type=float)
    sp.add_argument("--blur-support", type=int, default=5)

    sp = add("ablate", cmd_ablate, "run ablation rows on a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--methods", default="all", help="'all' or comma list of I,II,III,IV,V,proposed")
    sp.add_argument("--mode", default="participant_specific")
    sp.add_argument("--regressor", choices=("ridge", "svr"))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth" and min(args.sessions, args.participants) < 1:
            raise ValidationError("participants and sessions must be >= 1")
        args.func(args)
    except Spo2Error as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_status
    return 0


if __name__ == "__main__":
    sys.exit(main())
