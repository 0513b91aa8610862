"""Picking the best of several random candidates.

Each trial draws a random reference with 4 clusters and nine random
candidates with r = 2..10 clusters. None of them is related to the
reference, so a fair measure should pick every r about equally often.
Takes a minute or so.
"""

from qadjust import ExperimentConfig, run_experiment

cfg = ExperimentConfig.for_experiment("selection-bias", n_trials=300, seed=5)
res = run_experiment(cfg)

header = "   ".join(f"{r:>4}" for r in cfg.r_range)
for qp in cfg.q_list:
    print(f"\nq = {qp.label}      r: {header}")
    for measure in ("NMI_q", "AMI_q", "SMI_q"):
        freq = res.series(measure, qp.label)
        cells = "   ".join(f"{freq[float(r)]:4.2f}" for r in cfg.r_range)
        print(f"  {measure:<6}       {cells}")
print(f"\nuniform selection would be {1 / len(cfg.r_range):.2f} per r")
