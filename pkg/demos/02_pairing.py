"""Splitting offspring into poor and elite halves and matching them by angle.

Each poor solution is paired with the elite solution whose objective vector
points in the most similar direction from the ideal point. The greedy rule
lets several poor solutions share one elite; the Hungarian rule forces a
one-to-one match with the smallest total angle.
"""

import numpy as np

from seqmo.core import make_rng
from seqmo.moea import random_population
from seqmo.pairing import build_training_set
from seqmo.problems import CountingProblem, make_instance

problem = CountingProblem(make_instance("motsp", 10, 2, seed=7))
C = list(random_population(problem, 12, make_rng(7, "ea")))

for mode in ("greedy", "hungarian"):
    pairs, poor, elite = build_training_set(C, mode)
    print(f"{mode}: total angle {pairs.total_angle:.4f} rad")
    for r, c, a in zip(pairs.poor_index, pairs.elite_index, pairs.angles):
        fp = np.round(C[poor[r]].objectives, 2)
        fe = np.round(C[elite[c]].objectives, 2)
        print(f"  poor {fp} -> elite {fe}  angle {a:.3f}")
    shared = len(pairs) - len(set(pairs.elite_index.tolist()))
    print(f"  elites reused: {shared}")
