"""Similarity graphs, Laplacians, a Jacobi eigensolver and frequency projections."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import autodiff as ad
from .graph import Graph, normalized_laplacian

DEFAULT_K_SIM = 10
DEFAULT_K_EIG = 4


@dataclass(frozen=True)
class SimilarityGraph:
    s_prime: np.ndarray
    k_sim: int


@dataclass(frozen=True)
class SpectralBasis:
    """``k_eig`` lowest (ascending) and highest (descending) eigenpairs; vectors are columns."""

    low_vals: np.ndarray
    low_vecs: np.ndarray
    high_vals: np.ndarray
    high_vecs: np.ndarray


def cosine_matrix(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    xhat = np.where(norms > 0, x / np.where(norms > 0, norms, 1.0), 0.0)
    return xhat @ xhat.T


def sparse_self_similarity(features, k_sim: int = DEFAULT_K_SIM) -> SimilarityGraph:
    """Keep each row's ``k_sim`` most cosine-similar other nodes, then symmetrize by max.

    Negative similarities are clamped to zero so the degree matrix stays
    non-negative.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError("similarity graph needs at least two nodes")
    if not 1 <= k_sim < n:
        raise ValueError(f"k_sim must lie in [1, {n - 1}], got {k_sim}")
    sim = cosine_matrix(x)
    ranked = sim.copy()
    np.fill_diagonal(ranked, -np.inf)
    nbrs = np.argsort(-ranked, axis=1, kind="stable")[:, :k_sim]
    rows = np.repeat(np.arange(n), k_sim)
    cols = nbrs.ravel()
    s = np.zeros((n, n))
    s[rows, cols] = np.maximum(sim[rows, cols], 0.0)
    s = np.maximum(s, s.T)
    return SimilarityGraph(s, k_sim)


def laplacian(sg: SimilarityGraph | np.ndarray) -> np.ndarray:
    """Combinatorial Laplacian ``D' - S'``."""
    s = sg.s_prime if isinstance(sg, SimilarityGraph) else np.asarray(sg, dtype=np.float64)
    return np.diag(s.sum(axis=1)) - s


@numba.njit(cache=True)
def _jacobi_sweeps(a, v, tol, max_sweeps):
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    floor = 64.0 * 2.220446049250313e-16 * np.sqrt(scale)
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if np.sqrt(2.0 * off) <= max(tol, floor):
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return -1


def fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (lowest index on near-ties)."""
    vecs = vecs.copy()
    mag = np.abs(vecs)
    for j in range(vecs.shape[1]):
        col = mag[:, j]
        top = np.flatnonzero(col >= col.max() - 1e-12)[0] if col.size else 0
        if vecs[top, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs


def jacobi_eigh(matrix, tol: float = 1e-10, max_sweeps: int = 100, sym_tol: float = 1e-10):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues and the matching unit eigenvectors as
    columns, sign-normalized with :func:`fix_signs`.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.size and np.abs(a - a.T).max() > sym_tol:
        raise ValueError("matrix is not symmetric within tolerance")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    if n > 1 and _jacobi_sweeps(a, v, tol, max_sweeps) < 0:
        raise RuntimeError(f"Jacobi did not converge in {max_sweeps} sweeps")
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], fix_signs(v[:, order])


def extreme_eigenpairs(matrix, k_eig: int = DEFAULT_K_EIG) -> SpectralBasis:
    a = np.asarray(matrix, dtype=np.float64)
    n = a.shape[0]
    if not 1 <= k_eig <= n // 2:
        raise ValueError(f"k_eig must lie in [1, {n // 2}] for a {n}x{n} matrix, got {k_eig}")
    vals, vecs = jacobi_eigh(a)
    hi = np.arange(n - 1, n - 1 - k_eig, -1)
    return SpectralBasis(vals[:k_eig], vecs[:, :k_eig], vals[hi], vecs[:, hi])


def similarity_basis(hidden, k_sim: int = DEFAULT_K_SIM, k_eig: int = DEFAULT_K_EIG) -> SpectralBasis:
    """Low/high eigenpairs of the Laplacian of a kNN cosine graph on ``hidden`` rows."""
    x = hidden.value if isinstance(hidden, ad.Tensor) else np.asarray(hidden, dtype=np.float64)
    k = min(k_sim, x.shape[0] - 1)
    return extreme_eigenpairs(laplacian(sparse_self_similarity(x, k)), k_eig)


def project(features, u) -> ad.Tensor:
    """Rank-one projection ``u u^T H`` computed as ``u (u^T H)``; ``u`` is constant."""
    u = np.asarray(u, dtype=np.float64).reshape(-1, 1)
    if abs(np.linalg.norm(u) - 1.0) > 1e-8:
        raise ValueError("projection vector must have unit norm")
    h = features if isinstance(features, ad.Tensor) else ad.Tensor(features)
    if h.shape[0] != u.shape[0]:
        raise ad.ShapeError(f"projection vector length {u.shape[0]} != {h.shape[0]} rows")
    return ad.matmul(u, ad.matmul(u.T, h))


def eigenvalue_histogram(l, bins: int = 20, value_range=(0.0, 2.0), eps: float = 1e-6) -> np.ndarray:
    """Laplace-smoothed probability histogram of a symmetric matrix's eigenvalues."""
    if bins < 2:
        raise ValueError("need at least two bins")
    lo, hi = value_range
    vals, _ = jacobi_eigh(l)
    vals = np.clip(vals, lo, hi)
    counts, _ = np.histogram(vals, bins=bins, range=(lo, hi))
    p = counts / max(vals.size, 1) + eps
    return p / p.sum()


def graph_eigenvalue_histogram(g: Graph, bins: int = 20) -> np.ndarray:
    """Histogram of the symmetric-normalized Laplacian spectrum on ``[0, 2]``."""
    return eigenvalue_histogram(normalized_laplacian(g), bins, (0.0, 2.0))


def kl_divergence(p, q, eps: float = 1e-12) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(np.sum(p * (np.log(np.maximum(p, eps)) - np.log(np.maximum(q, eps)))))


def spectral_kl_heatmap(histograms) -> np.ndarray:
    """Matrix of ``KL(hist_i || hist_j)`` with an exactly zero diagonal."""
    hists = [np.asarray(h, dtype=np.float64) for h in histograms]
    if len({h.size for h in hists}) > 1:
        raise ValueError("histograms have different bin counts")
    k = len(hists)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                out[i, j] = max(kl_divergence(hists[i], hists[j]), 0.0)
    return out
