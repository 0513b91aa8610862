"""Why raw NMI misleads when candidates have different numbers of clusters.

Random partitions carry no information about each other, yet NMI grows
with the number of clusters r. The adjusted score stays near zero.
"""

import numpy as np

from qadjust import ExperimentConfig, run_experiment

cfg = ExperimentConfig.for_experiment("baseline-vary-r", n_trials=200, seed=1)
res = run_experiment(cfg)

print(f"N = {cfg.n_objects}, reference has c = {cfg.c_fixed} clusters, {cfg.n_trials} trials per r")
print(f"{'r':>3}  {'NMI_2':>8}  {'AMI_2':>8}  {'AMI':>8}")
nmi = res.series("NMI_q", "2")
ami2 = res.series("AMI_q", "2")
ami = res.series("AMI_q", "shannon")
for r in cfg.r_range:
    x = float(r)
    print(f"{r:>3}  {nmi[x]:8.4f}  {ami2[x]:8.4f}  {ami[x]:8.4f}")

# The same comparison, but the knob is how unbalanced the clusters are.
size = run_experiment(ExperimentConfig.for_experiment("baseline-vary-size", n_trials=200, seed=1))
print("\nbiggest cluster fraction vs mean NMI_2 / AMI_2")
for frac, value in size.series("NMI_q", "2").items():
    print(f"  {frac:.1f}  {value:.4f}  {size.series('AMI_q', '2')[frac]:+.4f}")

spread = np.ptp(list(ami2.values()))
print(f"\nAMI_2 moves by {spread:.4f} across r; NMI_2 moves by {np.ptp(list(nmi.values())):.4f}")
