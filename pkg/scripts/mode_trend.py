"""Pooled test metrics under the three experiment modes for a few seeds."""
import argparse

from rgbspo2 import evaluate, experiments

ap = argparse.ArgumentParser()
ap.add_argument("--seeds", type=int, nargs="+", default=[900, 901, 902])
ap.add_argument("--regressor", default="ridge", choices=["ridge", "svr"])
args = ap.parse_args()

print(f"{'seed':>6} " + " ".join(f"{m[:22]:>24}" for m in evaluate.MODES))
for seed in args.seeds:
    r = experiments.mode_trend(seed, args.regressor)
    print(f"{seed:>6} " + " ".join(f"{r[m].mae:>10.3f} / {r[m].rho:>10.3f}" for m in evaluate.MODES))
