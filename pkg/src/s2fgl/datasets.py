"""Offline dataset presets (SBM stand-ins) and dataset resolution."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .graph import Graph, load_graph, sbm_generate

# Cora class sizes, used to give the SBM presets a realistic class imbalance.
CORA_CLASS_SIZES = (351, 217, 418, 818, 426, 298, 180)


def scaled_sizes(total: int, reference=CORA_CLASS_SIZES) -> list[int]:
    ref = np.asarray(reference, dtype=np.float64)
    raw = ref / ref.sum() * total
    sizes = np.floor(raw).astype(int)
    for i in np.argsort(-(raw - sizes), kind="stable")[: total - sizes.sum()]:
        sizes[i] += 1
    return sizes.tolist()


def sbm_probabilities(sizes, avg_degree: float, homophily: float) -> tuple[float, float]:
    """``(p_in, p_out)`` giving the requested mean degree and intra-class edge share."""
    sizes = np.asarray(sizes, dtype=np.float64)
    n = sizes.sum()
    edges = avg_degree * n / 2.0
    intra_pairs = float((sizes * (sizes - 1) / 2.0).sum())
    inter_pairs = n * (n - 1) / 2.0 - intra_pairs
    p_in = min(1.0, homophily * edges / intra_pairs) if intra_pairs else 0.0
    p_out = min(1.0, (1.0 - homophily) * edges / inter_pairs) if inter_pairs else 0.0
    return p_in, p_out


def cora_like(total: int, seed: int, d: int = 16, feature_scale: float = 1.0) -> Graph:
    sizes = scaled_sizes(total)
    p_in, p_out = sbm_probabilities(sizes, avg_degree=4.0, homophily=0.81)
    return sbm_generate(sizes, p_in, p_out, d, seed=seed, feature_scale=feature_scale)


PRESETS = {
    "cora-like": lambda seed: cora_like(2708, seed),
    "sbm-cora-500": lambda seed: cora_like(500, seed),
    "sbm-200": lambda seed: sbm_generate([50] * 4, 0.12, 0.01, 16, seed=seed),
    "sbm-300-6": lambda seed: sbm_generate([50] * 6, 0.1, 0.005, 16, seed=seed),
    "sbm-hetero": lambda seed: sbm_generate([60] * 4, [0.5, 0.2, 0.08, 0.03], 0.002, 16, seed=seed),
}


def resolve_dataset(name: str, seed: int, sbm: dict | None = None) -> Graph:
    """A preset name, ``sbm`` (with ``sbm`` parameters) or a path to a graph file."""
    if name in PRESETS:
        return PRESETS[name](seed)
    if name == "sbm":
        sbm = dict(sbm or {})
        return sbm_generate(
            sbm["blocks"],
            sbm["p_in"],
            sbm["p_out"],
            sbm.get("dim", 16),
            seed=seed,
            feature_scale=sbm.get("feature_scale", 1.0),
        )
    path = Path(name)
    if not path.exists():
        raise FileNotFoundError(f"dataset {name!r} is neither a preset nor an existing file")
    return load_graph(path)
