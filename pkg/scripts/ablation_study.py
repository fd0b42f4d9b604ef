"""Ablation rows I-V and the proposed method on a synthetic trace cohort.

Trains one model per (method, participant) in the chosen mode and prints
the pooled and per-participant test metrics.
"""
import argparse

from rgbspo2 import evaluate, experiments

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--participants", type=int, default=5)
ap.add_argument("--mode", default="participant_specific", choices=evaluate.MODES)
ap.add_argument("--regressor", default="ridge", choices=["ridge", "svr"])
ap.add_argument("--artifacts", default="none", choices=["none", "motion", "interferer"])
args = ap.parse_args()

spec = experiments.CohortSpec(n_participants=args.participants)
art = None
if args.artifacts == "motion":
    art = experiments.motion_artifacts()
elif args.artifacts == "interferer":
    spec = experiments.INTERFERER_SPEC
    spec = experiments.CohortSpec(**{**spec.__dict__, "n_participants": args.participants})
    art = experiments.interferer_artifacts()

sessions = experiments.cohort(args.seed, spec, art)
methods = list(evaluate.METHOD_IDS)
reg = experiments.REDUCED_SVR_GRID if args.regressor == "svr" else None
reports = {m: evaluate.run_ablation(sessions, m, mode=args.mode, regressor=args.regressor,
                                    regress_cfg=reg) for m in methods}
print(evaluate.ablation_table([reports[m] for m in methods], methods))
