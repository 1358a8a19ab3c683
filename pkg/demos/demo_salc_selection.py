"""
Choosing prototype nodes by label centrality
============================================

SALC adds a node's structural prominence to the influence it receives from
labeled nodes. The top third of each client's nodes feed its prototypes.
"""

import numpy as np

from s2fgl import datasets, graph
from s2fgl.ppr import salc, select_top_k

path = graph.Graph(2, [[0, 1]], np.zeros((2, 1)), [0, 1], 2)
scores = salc(path, [True, False])
print("two-node path SALC:", np.round(scores.salc, 4), "-> top-1:", select_top_k(scores, 0.5))

g = datasets.PRESETS["sbm-200"](0)
masks = graph.stratified_split(g, seed=0)
scores = salc(g, masks.train)
chosen = select_top_k(scores)
print(f"selected {chosen.size} of {g.n} nodes")
print("train share among selected:", masks.train[chosen].mean().round(3), "overall:", masks.train.mean().round(3))
print("mean degree selected vs all:", g.degrees()[chosen].mean().round(2), g.degrees().mean().round(2))
