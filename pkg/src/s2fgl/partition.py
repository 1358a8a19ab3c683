"""Louvain client partitioning with an exact client count."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class PartitionPlan:
    assignment: np.ndarray
    num_clients: int

    def members(self, client: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == client)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_clients)


def _to_nx(g: Graph, nodes=None) -> nx.Graph:
    h = nx.Graph()
    if nodes is None:
        h.add_nodes_from(range(g.n))
        h.add_edges_from(map(tuple, g.edges.tolist()))
        return h
    keep = set(int(v) for v in nodes)
    h.add_nodes_from(sorted(keep))
    h.add_edges_from((u, v) for u, v in g.edges.tolist() if u in keep and v in keep)
    return h


def _louvain(h: nx.Graph, seed: int) -> list[list[int]]:
    if h.number_of_edges() == 0:
        return [[v] for v in sorted(h.nodes)]
    comms = nx.community.louvain_communities(h, resolution=1.0, seed=seed)
    return sorted((sorted(c) for c in comms), key=lambda c: c[0])


def _bisect(h: nx.Graph, nodes: list[int]) -> list[list[int]]:
    """Split by BFS order from the lowest id; used when Louvain will not split."""
    order: list[int] = []
    seen: set[int] = set()
    for start in sorted(nodes):
        if start in seen:
            continue
        for v in nx.bfs_tree(h, start, sort_neighbors=sorted):
            if v not in seen:
                seen.add(v)
                order.append(v)
    half = len(order) // 2
    return [sorted(order[:half]), sorted(order[half:])]


def louvain_partition(g: Graph, target_clients: int, seed: int = 0) -> PartitionPlan:
    """Louvain communities, then merged or split until exactly ``target_clients`` remain.

    Merging folds the smallest community into the community it shares most
    edges with (or the next smallest, if it has no outside edges). Splitting
    reruns Louvain on the largest community.
    """
    if target_clients < 1:
        raise ValueError("target_clients must be at least 1")
    if target_clients > g.n:
        raise ValueError(f"cannot form {target_clients} clients from {g.n} nodes")
    h = _to_nx(g)
    comms = _louvain(h, seed)

    round_no = 0
    while len(comms) < target_clients:
        comms.sort(key=lambda c: (-len(c), c[0]))
        big = comms.pop(0)
        parts = _louvain(h.subgraph(big), seed + 1 + round_no)
        if len(parts) < 2:
            parts = _bisect(h.subgraph(big), big)
        need = target_clients - len(comms)
        if len(parts) > need:
            # keep the largest pieces, fold the rest into the biggest one
            parts.sort(key=lambda c: (-len(c), c[0]))
            head, tail = parts[: need - 1], parts[need - 1 :]
            parts = head + [sorted(v for c in tail for v in c)]
        comms.extend(parts)
        round_no += 1

    while len(comms) > target_clients:
        comms.sort(key=lambda c: (len(c), c[0]))
        small = comms.pop(0)
        owner = {v: i for i, c in enumerate(comms) for v in c}
        links = np.zeros(len(comms))
        for v in small:
            for u in h.neighbors(v):
                if u in owner:
                    links[owner[u]] += 1
        if links.max() > 0:
            best = max(range(len(comms)), key=lambda i: (links[i], -len(comms[i]), -comms[i][0]))
        else:
            best = 0
        comms[best] = sorted(comms[best] + small)

    comms.sort(key=lambda c: c[0])
    assignment = np.empty(g.n, dtype=np.int64)
    for cid, c in enumerate(comms):
        assignment[c] = cid
    return PartitionPlan(assignment, target_clients)


def modularity(g: Graph, assignment) -> float:
    """Newman modularity of a hard assignment (unweighted, resolution 1)."""
    assignment = np.asarray(assignment)
    m = g.num_edges
    if m == 0:
        return 0.0
    deg = g.degrees()
    q = 0.0
    for c in np.unique(assignment):
        inside = assignment == c
        l_c = np.sum(inside[g.edges[:, 0]] & inside[g.edges[:, 1]])
        d_c = deg[inside].sum()
        q += l_c / m - (d_c / (2.0 * m)) ** 2
    return float(q)
