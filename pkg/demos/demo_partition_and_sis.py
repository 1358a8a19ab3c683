"""
Louvain clients and the structure inertia score
===============================================

Splitting a graph into clients removes cross-client edges. The structure
inertia score (SIS) sums, over nodes, the strongest personalized-PageRank
influence received from any training node.
"""

import numpy as np

from s2fgl import datasets, graph, partition
from s2fgl.ppr import ppr, sis_partitioned

g = datasets.PRESETS["sbm-300-6"](0)
masks = graph.stratified_split(g, (0.1, 0.45, 0.45), seed=0)
print(f"{g.n} nodes, {g.num_edges} edges, {masks.train.sum()} training nodes")

for k in (1, 2, 5, 10, 20):
    plan = partition.louvain_partition(g, k, seed=0)
    q = partition.modularity(g, plan.assignment)
    s = sis_partitioned(g, plan, masks)
    print(f"clients={k:2d}  sizes={sorted(plan.sizes().tolist())[:5]}...  modularity={q:.3f}  SIS={s:.3f}")

# PPR for a triangle: every row sums to one, the diagonal carries the restart mass
k3 = graph.Graph(3, [[0, 1], [0, 2], [1, 2]], np.zeros((3, 1)), [0, 0, 0], 1)
print(np.round(ppr(k3).values, 4))
