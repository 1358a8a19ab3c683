"""Personalized PageRank, structure inertia and structure-aware label centrality."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import Graph, induced_subgraph
from .partition import PartitionPlan

logger = logging.getLogger(__name__)

DEFAULT_DAMPING = 0.85
DIRECT_SOLVE_LIMIT = 3000


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class PprMatrix:
    values: np.ndarray
    damping_alpha: float


@dataclass(frozen=True)
class CentralityScores:
    structural: np.ndarray
    label_influence: np.ndarray
    salc: np.ndarray
    prior_tau: np.ndarray


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"damping alpha must lie in (0, 1], got {alpha}")


def random_walk_matrix(g: Graph, self_loops: bool = False) -> np.ndarray:
    """``D^-1 A`` (or ``D^-1 (A + I)``); degree-0 rows are zero rows."""
    a = g.adjacency()
    if self_loops:
        a += np.eye(g.n)
    deg = a.sum(axis=1)
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / deg[deg > 0]
    return inv[:, None] * a


def ppr(g: Graph, damping_alpha: float = DEFAULT_DAMPING, self_loops: bool = False) -> PprMatrix:
    """Dense solve of ``(I - (1 - alpha) W) X = alpha I``."""
    _check_alpha(damping_alpha)
    if damping_alpha == 1.0:
        return PprMatrix(np.eye(g.n), 1.0)
    w = random_walk_matrix(g, self_loops)
    m = np.eye(g.n) - (1.0 - damping_alpha) * w
    try:
        x = np.linalg.solve(m, damping_alpha * np.eye(g.n))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("PPR system is singular") from exc
    return PprMatrix(x, damping_alpha)


def ppr_iterative(
    g: Graph,
    damping_alpha: float = DEFAULT_DAMPING,
    tol: float = 1e-8,
    self_loops: bool = False,
    max_iter: int = 10_000,
) -> PprMatrix:
    """Fixed-point iteration ``X <- alpha I + (1 - alpha) W X``."""
    _check_alpha(damping_alpha)
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = random_walk_matrix(g, self_loops)
    base = damping_alpha * np.eye(g.n)
    x = base.copy()
    residual = np.inf
    for _ in range(max_iter):
        nxt = base + (1.0 - damping_alpha) * (w @ x)
        residual = np.abs(nxt - x).max() if x.size else 0.0
        x = nxt
        if residual < tol:
            return PprMatrix(x, damping_alpha)
    raise ConvergenceError("ppr_iterative did not converge", residual)


def ppr_auto(g: Graph, damping_alpha: float = DEFAULT_DAMPING, self_loops: bool = False) -> PprMatrix:
    if g.n > DIRECT_SOLVE_LIMIT:
        return ppr_iterative(g, damping_alpha, 1e-8, self_loops)
    return ppr(g, damping_alpha, self_loops)


def sis(p: PprMatrix | np.ndarray, train_mask) -> float:
    """Sum over nodes of the largest PPR entry towards any training node."""
    values = p.values if isinstance(p, PprMatrix) else np.asarray(p)
    t = np.asarray(train_mask, dtype=bool)
    if not t.any():
        raise ValueError("sis needs at least one training node")
    return float(values[:, t].max(axis=1).sum())


def sis_partitioned(g: Graph, plan: PartitionPlan, masks, damping_alpha: float = DEFAULT_DAMPING) -> float:
    """Per-client SIS on the induced subgraphs, summed over clients."""
    total = 0.0
    for client in range(plan.num_clients):
        nodes = plan.members(client)
        train = masks.train[nodes]
        if not train.any():
            logger.warning("client %d has no training node; contributes 0 to SIS", client)
            continue
        sub = induced_subgraph(g, nodes).graph
        total += sis(ppr_auto(sub, damping_alpha), train)
    return total


def salc(g: Graph, train_mask, damping_alpha: float = DEFAULT_DAMPING, tau=None) -> CentralityScores:
    """Structural prominence plus label influence for every node.

    Structural prominence uses the plain PPR matrix; label influence sums
    rows of the self-loop PPR matrix over the labeled nodes.
    """
    tau = np.ones(g.n) if tau is None else np.asarray(tau, dtype=np.float64)
    if tau.shape != (g.n,) or np.any(tau < 0):
        raise ValueError("tau must be a non-negative vector with one entry per node")
    labeled = np.asarray(train_mask, dtype=bool)
    p = ppr_auto(g, damping_alpha).values
    structural = (p * tau[None, :]).max(axis=1) if g.n else np.zeros(0)
    if labeled.any():
        p_loop = ppr_auto(g, damping_alpha, self_loops=True).values
        label_influence = p_loop[labeled].sum(axis=0)
    else:
        label_influence = np.zeros(g.n)
    return CentralityScores(structural, label_influence, structural + label_influence, tau)


def select_top_k(scores: CentralityScores, k_fraction: float = 1.0 / 3.0) -> np.ndarray:
    """Ids of the ``max(1, floor(k_fraction * N))`` highest SALC scores, lower id first on ties."""
    if not 0.0 < k_fraction <= 1.0:
        raise ValueError(f"k_fraction must lie in (0, 1], got {k_fraction}")
    n = scores.salc.size
    k = max(1, int(np.floor(k_fraction * n + 1e-9)))
    order = np.lexsort((np.arange(n), -scores.salc))
    return np.sort(order[:k])
