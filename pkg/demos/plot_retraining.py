"""
Retraining a compressed layer
=============================

Shared weights move together: each centroid takes the summed gradient of
the entries assigned to it.
"""

import numpy as np
from hamsham import chain_prune_then_quantize
from hamsham.retrain import Layer, ToyNetwork, TiedLayer, retrain, loss

rng = np.random.default_rng(2)
X = rng.normal(size=(256, 32))
W_true = rng.normal(size=(32, 4))
Y = X @ W_true

net = ToyNetwork([Layer(W_true + 0.5 * rng.normal(size=W_true.shape), np.zeros(4))])
print("dense loss:", round(loss(net, X, Y), 3))

pr, book = chain_prune_then_quantize(net.layers[0].weight, 50, "WS", k=8)
tied = TiedLayer.from_codebook(book, pr.mask)
trace = retrain(net, {0: tied}, X, Y, epochs=50, lr=1e-3)

print("compressed loss before retraining:", round(trace[0], 3))
print("after 50 epochs:", round(trace[-1], 3))
W = net.layers[0].weight
print("distinct nonzero weights:", len(np.unique(W[W != 0])))
