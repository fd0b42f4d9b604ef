"""Pipeline R values against the closed-form narrowband log ratio."""
from rgbspo2 import experiments

r = experiments.ror_sweep()
print(f"{'SpO2':>6} {'R_r':>9} {'closed':>9} {'R_b':>9} {'closed':>9} {'RoR_rb':>8}")
for s, R, c, q in zip(r["spo2"], r["R"], r["closed_form"], r["ror"]):
    print(f"{s:6.1f} {R[0]:9.6f} {c[0]:9.6f} {R[2]:9.6f} {c[2]:9.6f} {q:8.4f}")
