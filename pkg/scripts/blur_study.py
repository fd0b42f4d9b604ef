"""Test MAE on rendered frames with and without Gaussian blur."""
import argparse

from rgbspo2 import experiments

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--participants", type=int, default=10)
ap.add_argument("--size", type=int, nargs=2, default=[80, 60], metavar=("W", "H"))
ap.add_argument("--sigma", type=float, default=2.6)
ap.add_argument("--support", type=int, default=15)
args = ap.parse_args()

spec = experiments.FrameCohortSpec(n_participants=args.participants, width=args.size[0],
                                   height=args.size[1], blur_sigma=args.sigma,
                                   blur_support=args.support)
r = experiments.blur_robustness(args.seed, spec)
a, b = r["sharp"], r["blurred"]
print(f"sharp   MAE {a.mae:.3f}  rho {a.rho:.3f}")
print(f"blurred MAE {b.mae:.3f}  rho {b.rho:.3f}  ({100 * (b.mae / a.mae - 1):+.1f}%)")
