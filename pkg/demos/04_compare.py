"""A miniature version of the HV comparison table.

All runs on one instance share normalization bounds taken from the union of
their final fronts; cells show mean (sample std) over seeds. The full-size
comparison is ``seqmo compare --sizes 15 20 --seeds 10``.
"""

from seqmo.harness import RunConfig, compare
from seqmo.neuralnet import TrainConfig

template = RunConfig(n=10, n_pop=30, max_fe=3_000, train_every=3,
                     train=TrainConfig(epochs=5, hidden_units=32, embedding_dim=16))
table = compare([template], ["nsga2", "moead", "seqmo-moead"], seeds=[1, 2, 3])
print(table.to_text())
print(table.summary_csv())
