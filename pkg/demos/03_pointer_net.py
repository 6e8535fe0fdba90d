"""The pointer network on a task with a known answer.

Every input permutation has the identity as its label, so a working network
must learn to point at the position holding 0, then 1, and so on. Decoding
is masked, so even an untrained network only ever emits permutations.
"""

from types import SimpleNamespace

import numpy as np

from seqmo.core import is_permutation, make_rng
from seqmo.neuralnet import PointerNet, TrainConfig, token_accuracy, train

N = 8
rng = make_rng(3, "neural_init")
X = np.array([rng.permutation(N) for _ in range(256)])
Y = np.tile(np.arange(N), (len(X), 1))

cfg = TrainConfig(epochs=60, hidden_units=32, embedding_dim=16)
net = PointerNet.from_config(N, cfg, rng)
print("untrained accuracy", token_accuracy(net, X, Y))
print("untrained decodes valid:", all(is_permutation(p, N) for p in net.decode(X)))

net, losses = train(SimpleNamespace(data=list(X), labels=list(Y)), cfg, net, rng)
print(f"loss epoch 1 {losses[0]:.3f} (ln {N}! = {np.log(np.arange(1, N + 1)).sum():.3f}), "
      f"epoch {len(losses)} {losses[-1]:.4f}")
print("trained accuracy", token_accuracy(net, X, Y))
print("decode of", X[0] + 1, "->", net.decode(X[:1])[0] + 1)
