"""Prototype repository, distillation and spectral alignment losses."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .spectral import DEFAULT_K_EIG, DEFAULT_K_SIM, SpectralBasis, project, similarity_basis

logger = logging.getLogger(__name__)

NUM_ANCHORS = 4
REPOSITORY_SCHEMA = "s2fgl-repository/1"


class EmptyRepositoryError(ValueError):
    """No anchor is present; skip distillation until a repository has been broadcast."""


@dataclass(frozen=True)
class LocalPrototypes:
    """Per-class mean embeddings; ``counts[c] == 0`` marks an absent class."""

    means: np.ndarray
    counts: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return self.counts > 0


@dataclass(frozen=True)
class PrototypeRepository:
    """Anchors stacked class-major: row ``c * num_anchors + k``."""

    anchors: np.ndarray
    present: np.ndarray
    num_classes: int
    num_anchors: int = NUM_ANCHORS

    @staticmethod
    def row(c: int, k: int, num_anchors: int = NUM_ANCHORS) -> int:
        return c * num_anchors + k

    def active(self) -> np.ndarray:
        return self.anchors[self.present]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# schema: {REPOSITORY_SCHEMA}\n")
            w = csv.writer(fh)
            w.writerow(["class", "anchor", "present"] + [f"v{j}" for j in range(self.anchors.shape[1])])
            for c in range(self.num_classes):
                for k in range(self.num_anchors):
                    r = self.row(c, k, self.num_anchors)
                    w.writerow([c, k, int(self.present[r])] + [repr(float(x)) for x in self.anchors[r]])

    @classmethod
    def from_csv(cls, path) -> "PrototypeRepository":
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
            if first != f"# schema: {REPOSITORY_SCHEMA}":
                raise ValueError(f"unexpected repository schema line {first!r}")
            rows = list(csv.reader(fh))[1:]
        classes = max(int(r[0]) for r in rows) + 1
        anchors = max(int(r[1]) for r in rows) + 1
        dim = len(rows[0]) - 3
        mat = np.zeros((classes * anchors, dim))
        present = np.zeros(classes * anchors, dtype=bool)
        for r in rows:
            i = int(r[0]) * anchors + int(r[1])
            present[i] = bool(int(r[2]))
            mat[i] = [float(x) for x in r[3:]]
        return cls(mat, present, classes, anchors)


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        for v in (self.lambda1, self.lambda2):
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"loss weights must be finite and non-negative, got {v}")


def local_prototypes(hidden, labels, selected, num_classes: int) -> LocalPrototypes:
    """Class means of ``hidden`` rows over the selected nodes that carry a label."""
    h = hidden.value if isinstance(hidden, ad.Tensor) else np.asarray(hidden, dtype=np.float64)
    labels = np.asarray(labels)
    sel = np.asarray(selected, dtype=np.int64)
    sel = sel[labels[sel] >= 0]
    counts = np.bincount(labels[sel], minlength=num_classes)
    sums = np.zeros((num_classes, h.shape[1]))
    np.add.at(sums, labels[sel], h[sel])
    means = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], 0.0)
    return LocalPrototypes(means, counts)


def aggregate_global_repository(
    all_locals, fraction: float = 0.5, rng=None, num_anchors: int = NUM_ANCHORS
) -> PrototypeRepository:
    """Build ``num_anchors`` count-weighted anchors per class from random client subsets.

    For each class and anchor, ``ceil(fraction * holders)`` of the clients
    holding that class are drawn without replacement.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    all_locals = list(all_locals)
    if not all_locals:
        raise ValueError("no client prototypes to aggregate")
    rng = rng if rng is not None else np.random.default_rng(0)
    num_classes, dim = all_locals[0].means.shape
    anchors = np.zeros((num_classes * num_anchors, dim))
    present = np.zeros(num_classes * num_anchors, dtype=bool)
    for c in range(num_classes):
        holders = [i for i, lp in enumerate(all_locals) if lp.counts[c] > 0]
        if not holders:
            logger.warning("class %d has no prototype on any client; its anchors are absent", c)
            continue
        take = min(len(holders), math.ceil(fraction * len(holders) - 1e-9))
        for k in range(num_anchors):
            if take == len(holders):
                chosen = holders
            else:
                chosen = sorted(rng.choice(holders, size=take, replace=False).tolist())
            w = np.array([all_locals[i].counts[c] for i in chosen], dtype=np.float64)
            stack = np.stack([all_locals[i].means[c] for i in chosen])
            r = c * num_anchors + k
            anchors[r] = (w[:, None] * stack).sum(axis=0) / w.sum()
            present[r] = True
    return PrototypeRepository(anchors, present, num_classes, num_anchors)


def anchor_distribution(hidden, repo: PrototypeRepository, temperature: float = 1.0) -> ad.Tensor:
    """Row softmax of cosine similarities to every present anchor."""
    active = repo.active()
    if active.shape[0] == 0:
        raise EmptyRepositoryError("prototype repository is empty; skip FKD during warm-up")
    sims = ad.cosine_sim_rows(hidden, active)
    if temperature != 1.0:
        sims = ad.scale(sims, 1.0 / temperature)
    return ad.softmax_rows(sims)


def fkd_loss(local_hidden, global_hidden, repo: PrototypeRepository, nodes=None, temperature: float = 1.0) -> ad.Tensor:
    """Mean KL between local and frozen global anchor-similarity distributions."""
    local_hidden = local_hidden if isinstance(local_hidden, ad.Tensor) else ad.Tensor(local_hidden)
    g = global_hidden.value if isinstance(global_hidden, ad.Tensor) else np.asarray(global_hidden, dtype=np.float64)
    if nodes is not None:
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.size == 0:
            raise ValueError("fkd_loss needs at least one node")
        local_hidden = ad.take_rows(local_hidden, nodes)
        g = g[nodes]
    p = anchor_distribution(local_hidden, repo, temperature)
    q = anchor_distribution(g, repo, temperature)
    return ad.kl_rows(p, ad.stop_gradient(q))


def fgma_loss(
    local_hidden,
    global_hidden,
    k_sim: int = DEFAULT_K_SIM,
    k_eig: int = DEFAULT_K_EIG,
    local_basis: SpectralBasis | None = None,
    global_basis: SpectralBasis | None = None,
) -> ad.Tensor:
    """Sum over low/high eigenvectors of the MSE between local and global projections.

    Bases come from the similarity-graph Laplacians of the (detached) local
    and global embeddings unless passed in. Returns a zero constant when the
    graph has fewer than ``2 * k_eig`` nodes.
    """
    local_hidden = local_hidden if isinstance(local_hidden, ad.Tensor) else ad.Tensor(local_hidden)
    g = global_hidden.value if isinstance(global_hidden, ad.Tensor) else np.asarray(global_hidden, dtype=np.float64)
    n = local_hidden.shape[0]
    if n < 2 * k_eig:
        logger.warning("fgma_loss skipped: %d nodes < 2 * k_eig = %d", n, 2 * k_eig)
        return ad.Tensor(np.zeros((1, 1)))
    local_basis = local_basis or similarity_basis(local_hidden.value, k_sim, k_eig)
    global_basis = global_basis or similarity_basis(g, k_sim, k_eig)
    g_t = ad.Tensor(g)
    loss = None
    for m in range(k_eig):
        for loc, glob in ((local_basis.low_vecs, global_basis.low_vecs), (local_basis.high_vecs, global_basis.high_vecs)):
            term = ad.mse(project(local_hidden, loc[:, m]), project(g_t, glob[:, m]))
            loss = term if loss is None else loss + term
    return loss


def total_loss(ce, fkd, fgma, w: LossWeights) -> ad.Tensor:
    """``ce + lambda1 * fkd + lambda2 * fgma``; zero-weighted terms are dropped."""
    out = ce
    if fkd is not None and w.lambda1:
        out = out + ad.scale(fkd, w.lambda1)
    if fgma is not None and w.lambda2:
        out = out + ad.scale(fgma, w.lambda2)
    return out
