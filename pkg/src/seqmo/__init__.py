"""Learning-assisted evolutionary optimization of multi-objective permutation
problems.

A pointer network is trained, generation by generation, to map poor
offspring onto angle-matched elite offspring; its decodes join the
offspring in environmental selection.

>>> from seqmo.harness import RunConfig, run_seqmo
>>> result = run_seqmo(RunConfig(n=15, max_fe=5000, seed=1))
"""

__version__ = "0.1.0"
