"""Graph data model, text-file ingestion, SBM generation and splitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

UNLABELED = -1


class GraphFormatError(ValueError):
    """Malformed graph file; message carries the offending line number."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with node features and (optional) labels.

    ``edges`` is an ``(m, 2)`` int array with ``u < v`` in every row, sorted
    lexicographically. Labels equal to ``-1`` mark unlabeled nodes.
    """

    n: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] != self.n:
            raise ValueError(f"feature matrix must have {self.n} rows, got shape {features.shape}")
        if labels.shape != (self.n,):
            raise ValueError(f"labels must have length {self.n}")
        if np.any(labels >= self.num_classes) or np.any(labels < UNLABELED):
            raise ValueError(f"labels must lie in [-1, {self.num_classes})")
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not stored")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            edges = np.stack([lo, hi], axis=1)
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges = edges[order]
            if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
                raise ValueError("duplicate undirected edge")
        for name, arr in (("edges", edges), ("features", features), ("labels", labels)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n).astype(np.float64)


@dataclass(frozen=True)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def restrict(self, nodes: np.ndarray) -> "SplitMasks":
        """Masks for the sub-array of ``nodes`` (parent ids, in order)."""
        return SplitMasks(self.train[nodes], self.val[nodes], self.test[nodes])


@dataclass(frozen=True)
class Subgraph:
    """An induced subgraph plus the mapping back to the parent graph."""

    graph: Graph
    parent_ids: np.ndarray
    old_to_new: dict = field(repr=False)


# -- file format ----------------------------------------------------------


def load_graph(path) -> Graph:
    """Read the ``N d C`` / node rows / ``EDGES`` / edge rows text format.

    Edges are symmetrized (``u v`` and ``v u`` collapse); a literal
    repetition of the same pair is an error, as are self-loops.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = [(i + 1, ln.strip()) for i, ln in enumerate(fh)]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise GraphFormatError(f"{path}: empty file")
    no, header = lines[0]
    try:
        n, d, c = (int(t) for t in header.split())
    except ValueError:
        raise GraphFormatError(f"{path}:{no}: header must be 'N d C'") from None
    if len(lines) < n + 2:
        raise GraphFormatError(f"{path}: expected {n} node rows and an EDGES line")
    labels = np.empty(n, dtype=np.int64)
    features = np.empty((n, d))
    for k in range(n):
        no, ln = lines[1 + k]
        parts = ln.split()
        if len(parts) != d + 1:
            raise GraphFormatError(f"{path}:{no}: expected {d + 1} fields, got {len(parts)}")
        try:
            labels[k] = int(parts[0])
            features[k] = [float(t) for t in parts[1:]]
        except ValueError:
            raise GraphFormatError(f"{path}:{no}: non-numeric field") from None
        if not (UNLABELED <= labels[k] < c):
            raise GraphFormatError(f"{path}:{no}: label {labels[k]} outside [-1, {c})")
    no, sentinel = lines[1 + n]
    if sentinel != "EDGES":
        raise GraphFormatError(f"{path}:{no}: expected 'EDGES', got {sentinel!r}")
    seen = set()
    edges = []
    for no, ln in lines[2 + n :]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{no}: edge row needs two ids")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"{path}:{no}: non-integer node id") from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"{path}:{no}: edge ({u}, {v}) references a node outside [0, {n})")
        if u == v:
            raise GraphFormatError(f"{path}:{no}: self-loop on node {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError(f"{path}:{no}: duplicate edge ({u}, {v})")
        seen.add(key)
        edges.append(key)
    return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), features, labels, c)


def save_graph(g: Graph, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{g.n} {g.num_features} {g.num_classes}\n")
        for lab, row in zip(g.labels, g.features):
            fh.write(" ".join([str(int(lab))] + [repr(float(x)) for x in row]) + "\n")
        fh.write("EDGES\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


# -- synthetic data -------------------------------------------------------


def sbm_generate(
    blocks,
    p_in,
    p_out: float,
    d: int,
    seed: int = 0,
    feature_scale: float = 1.0,
    noise: float = 1.0,
) -> Graph:
    """Stochastic block model with class-mean Gaussian features.

    ``p_in`` may be a scalar or one probability per block. Each block gets a
    random mean vector of norm ``feature_scale``; features are that mean
    plus ``noise``-scaled standard normal noise. Labels are block ids.
    """
    sizes = np.asarray(blocks, dtype=np.int64)
    if sizes.size == 0 or np.any(sizes <= 0):
        raise ValueError("every block must contain at least one node")
    p_in_arr = np.broadcast_to(np.asarray(p_in, dtype=np.float64), sizes.shape)
    for p in (*p_in_arr, p_out):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(sizes.size), sizes)
    n = int(sizes.sum())
    prob = np.where(labels[:, None] == labels[None, :], p_in_arr[labels][:, None], p_out)
    iu, ju = np.triu_indices(n, k=1)
    draws = rng.random(iu.size)
    keep = draws < prob[iu, ju]
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    means = rng.standard_normal((sizes.size, d))
    means *= feature_scale / np.maximum(np.linalg.norm(means, axis=1, keepdims=True), 1e-12)
    features = means[labels] + noise * rng.standard_normal((n, d))
    return Graph(n, edges, features, labels, int(sizes.size))


# -- structure ------------------------------------------------------------


def induced_subgraph(g: Graph, nodes) -> Subgraph:
    """Keep ``nodes`` (re-indexed densely in the given order) and the edges among them."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        raise ValueError("induced_subgraph needs at least one node")
    if len(np.unique(nodes)) != nodes.size:
        raise ValueError("node subset contains duplicates")
    if nodes.min() < 0 or nodes.max() >= g.n:
        raise ValueError("node subset references unknown nodes")
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[nodes] = np.arange(nodes.size)
    if g.num_edges:
        e = remap[g.edges]
        e = e[(e >= 0).all(axis=1)]
    else:
        e = np.empty((0, 2), dtype=np.int64)
    sub = Graph(int(nodes.size), e, g.features[nodes], g.labels[nodes], g.num_classes)
    return Subgraph(sub, nodes, {int(o): i for i, o in enumerate(nodes)})


def stratified_split(g: Graph, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> SplitMasks:
    """Per-class shuffled train/val/test masks.

    Each class gets ``floor(ratio * n_c)`` val and test nodes; the remainder
    goes to train. Classes with fewer than three nodes go entirely to train.
    Unlabeled nodes are left out of every mask.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    train = np.zeros(g.n, dtype=bool)
    val = np.zeros(g.n, dtype=bool)
    test = np.zeros(g.n, dtype=bool)
    for c in range(g.num_classes):
        members = np.flatnonzero(g.labels == c)
        if members.size == 0:
            continue
        if members.size < 3:
            logger.warning("class %d has %d nodes; all assigned to train", c, members.size)
            train[members] = True
            continue
        members = rng.permutation(members)
        n_val = int(np.floor(ratios[1] * members.size + 1e-9))
        n_test = int(np.floor(ratios[2] * members.size + 1e-9))
        val[members[:n_val]] = True
        test[members[n_val : n_val + n_test]] = True
        train[members[n_val + n_test :]] = True
    return SplitMasks(train, val, test)


def normalized_adjacency(g: Graph, add_self_loops: bool = True) -> np.ndarray:
    """``D^-1/2 (A [+ I]) D^-1/2``; degree-0 rows stay zero."""
    a = g.adjacency()
    if add_self_loops:
        a = a + np.eye(g.n)
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def normalized_laplacian(g: Graph) -> np.ndarray:
    """``I - D^-1/2 A D^-1/2`` with zero rows and columns for isolated nodes."""
    a_hat = normalized_adjacency(g, add_self_loops=False)
    deg = g.degrees()
    return np.diag((deg > 0).astype(np.float64)) - a_hat
