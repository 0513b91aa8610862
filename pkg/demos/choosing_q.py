"""Choosing the entropy order q for a clustering comparison.

Small q rewards candidates whose clusters are pure even if they leave
one messy cluster; large q (q = 2 is ARI) favours balanced errors. Each
reference scenario has two candidates whose ranking flips somewhere
along q.
"""

from qadjust import ari, ami_q, compare
from qadjust.experiments import run_scenario_q_sweep
from qadjust.fixtures import scenario, scenario_names

for name in scenario_names():
    (n1, u1), (n2, u2) = scenario(name)
    print(f"== {name}")
    print("   U1 rows:", u1.tolist())
    print("   U2 rows:", u2.tolist())
    for q in (0.5, 1.0, 2.0, 2.5, 3.0):
        label = "shannon" if q == 1.0 else q
        a, b = ami_q(u1, label), ami_q(u2, label)
        print(f"   q = {q:<4} AMI(U1) = {a:.4f}  AMI(U2) = {b:.4f}  -> {'U1' if a > b else 'U2'}")
    print(f"   ARI: U1 {ari(u1):.4f}, U2 {ari(u2):.4f}")

    sweep = run_scenario_q_sweep([(n1, u1), (n2, u2)])
    for cross in sweep.metadata["crossings"]:
        print(f"   ranking flips near q = {cross['q']:.3f}")

# Everything for one table at once, as the CLI prints it.
_, table = scenario("balanced-4")[1]
print()
print(compare(table, q_list=[0.5, 2.5]).to_human())
