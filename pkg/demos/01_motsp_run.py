"""A short SeqMO run on a random bi-objective TSP.

The network is trained every third generation on poor -> elite offspring
pairs, and its decoded tours compete for MOEA/D subproblems. The budget is
cut to 5,000 evaluations so the script finishes in a few seconds.
"""

import tempfile
from pathlib import Path

from seqmo.harness import RunConfig, run, trace_table, write_run
from seqmo.neuralnet import TrainConfig

cfg = RunConfig(n=12, n_pop=40, max_fe=5_000, train_every=3,
                train=TrainConfig(epochs=10, hidden_units=32, embedding_dim=16))
result = run(cfg)
print(f"{cfg.instance_label} {cfg.label}: HV {result.hv:.4f} after "
      f"{result.evaluations} evaluations in {result.generations} generations")

# the final front, best tours first by the first objective
F = result.population.objectives
for f in sorted(map(tuple, F))[:5]:
    print("  f =", tuple(round(x, 3) for x in f))

# how many population slots the predicted tours took in each training iteration
out = write_run(result, Path(tempfile.mkdtemp()) / "motsp12")
print(trace_table(out / "update_trace.csv"))
print("artefacts in", out)
