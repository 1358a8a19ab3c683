"""Experiment drivers and their CSV / JSON-lines artifacts."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .datasets import resolve_dataset
from .federation import TrainingResult, final_metric, run_training
from .graph import induced_subgraph, stratified_split
from .partition import louvain_partition
from .ppr import sis_partitioned
from .spectral import graph_eigenvalue_histogram, spectral_kl_heatmap

OUTPUT_ROOT_ENV = "S2FGL_OUTPUT_ROOT"

METRICS_SCHEMA = "s2fgl-metrics/1"
SIS_SCHEMA = "s2fgl-sis-curve/1"
HEATMAP_SCHEMA = "s2fgl-spectral-heatmap/1"
HISTOGRAM_SCHEMA = "s2fgl-eigen-histograms/1"
ABLATION_SCHEMA = "s2fgl-ablation/1"
SENSITIVITY_SCHEMA = "s2fgl-sensitivity/1"
ROUNDS_SCHEMA = "s2fgl-rounds/1"


@dataclass
class MetricsRecord:
    experiment_id: str
    method: str
    finals: list
    mean: float
    std: float
    series: list

    @classmethod
    def from_result(cls, experiment_id: str, method: str, result: TrainingResult) -> "MetricsRecord":
        series = [[r.test_accuracy for r in reps] for reps in result.reports]
        return cls(experiment_id, method, list(result.finals), result.mean, result.std, series)


def output_dir(cfg: ExperimentConfig) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = Path(cfg.output_dir)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def graph_for(cfg: ExperimentConfig):
    return lambda seed: resolve_dataset(cfg.dataset, cfg.dataset_seed(seed), cfg.sbm_params())


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, schema: str, header, rows) -> None:
    buf = io.StringIO()
    buf.write(f"# schema: {schema}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def train(cfg: ExperimentConfig, log_path: Path | None = None, **changes) -> TrainingResult:
    tcfg = dataclasses.replace(cfg.train_config(), **changes)
    fh = log_path.open("a", encoding="utf-8") if log_path else None

    def on_round(seed, report):
        if fh:
            rec = {"schema": ROUNDS_SCHEMA, "method": tcfg.method, "seed": seed, **report.to_dict()}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    try:
        return run_training(tcfg, cfg.seeds, graph_for(cfg), on_round)
    finally:
        if fh:
            fh.close()


def run_experiment(cfg: ExperimentConfig) -> MetricsRecord:
    """Train per seed; write ``metrics.csv``, ``rounds.jsonl`` and ``config.resolved``."""
    out = output_dir(cfg)
    (out / "config.resolved").write_text(cfg.to_text(), encoding="utf-8")
    log = out / "rounds.jsonl"
    log.write_text("", encoding="utf-8")
    marker = out / "INCOMPLETE"
    marker.write_text("run in progress or failed\n", encoding="utf-8")
    result = train(cfg, log)
    record = MetricsRecord.from_result(cfg.experiment_id, cfg.method, result)
    _write_csv(
        out / "metrics.csv",
        METRICS_SCHEMA,
        ["experiment_id", "dataset", "method", "backbone", "num_clients", "seeds", "finals", "mean", "std", "timestamp"],
        [
            [
                cfg.experiment_id,
                cfg.dataset,
                cfg.method,
                cfg.backbone,
                cfg.num_clients,
                ";".join(str(s) for s in cfg.seeds),
                ";".join(_fmt(f) for f in record.finals),
                _fmt(record.mean),
                _fmt(record.std),
                datetime.now(timezone.utc).isoformat(timespec="seconds"),
            ]
        ],
    )
    marker.unlink()
    return record


def sis_curve(cfg: ExperimentConfig, client_counts=None) -> list[tuple]:
    """Rows ``(clients, sis_sum, sis_per_node)``, averaged over the configured seeds."""
    counts = list(client_counts or cfg.client_counts)
    rows = []
    for count in counts:
        vals, per_node = [], []
        for seed in cfg.seeds:
            g = graph_for(cfg)(seed)
            masks = stratified_split(g, cfg.split, seed=seed)
            plan = louvain_partition(g, count, seed=seed)
            s = sis_partitioned(g, plan, masks, cfg.damping_alpha)
            vals.append(s)
            per_node.append(s / g.n)
        rows.append((count, float(np.mean(vals)), float(np.mean(per_node))))
    return rows


def emit_sis_curve(cfg: ExperimentConfig, client_counts=None) -> Path:
    rows = sis_curve(cfg, client_counts)
    path = output_dir(cfg) / "sis_curve.csv"
    _write_csv(path, SIS_SCHEMA, ["clients", "sis_sum", "sis_per_node"], [[c, _fmt(s), _fmt(p)] for c, s, p in rows])
    return path


def spectral_heatmap(cfg: ExperimentConfig, num_clients: int | None = None, seed: int | None = None):
    """Per-client normalized-Laplacian histograms and their pairwise KL matrix."""
    k = num_clients or cfg.num_clients
    if k < 2:
        raise ValueError("spectral heatmap needs at least two clients")
    seed = cfg.seeds[0] if seed is None else seed
    g = graph_for(cfg)(seed)
    plan = louvain_partition(g, k, seed=seed)
    hists = [graph_eigenvalue_histogram(induced_subgraph(g, plan.members(c)).graph, cfg.bins) for c in range(k)]
    return np.array(hists), spectral_kl_heatmap(hists)


def emit_spectral_heatmap(cfg: ExperimentConfig, num_clients: int | None = None) -> Path:
    hists, heat = spectral_heatmap(cfg, num_clients)
    out = output_dir(cfg)
    k = heat.shape[0]
    _write_csv(
        out / "spectral_heatmap.csv",
        HEATMAP_SCHEMA,
        ["client"] + [str(j) for j in range(k)],
        [[i] + [_fmt(x) for x in heat[i]] for i in range(k)],
    )
    _write_csv(
        out / "eigen_histograms.csv",
        HISTOGRAM_SCHEMA,
        ["client"] + [f"bin{b}" for b in range(hists.shape[1])],
        [[i] + [_fmt(x) for x in hists[i]] for i in range(k)],
    )
    return out / "spectral_heatmap.csv"


ABLATION_VARIANTS = (
    ("neither", 0, 0, "fedavg"),
    ("nlir-only", 1, 0, "nlir-only"),
    ("fgma-only", 0, 1, "fgma-only"),
    ("both", 1, 1, "s2fgl"),
)


def ablation(cfg: ExperimentConfig) -> dict:
    return {name: train(cfg, method=method) for name, _, _, method in ABLATION_VARIANTS}


def run_ablation(cfg: ExperimentConfig) -> Path:
    results = ablation(cfg)
    rows = []
    for name, nlir, fgma, _ in ABLATION_VARIANTS:
        r = results[name]
        rows.append([name, nlir, fgma, ";".join(_fmt(f) for f in r.finals), _fmt(r.mean), _fmt(r.std)])
    path = output_dir(cfg) / "ablation.csv"
    _write_csv(path, ABLATION_SCHEMA, ["variant", "nlir", "fgma", "finals", "mean", "std"], rows)
    return path


def sensitivity(cfg: ExperimentConfig, nlir_scales=None, fgma_scales=None) -> list[tuple]:
    """Rows ``(factor, scale, mean, delta_vs_fedavg)``; the other factor keeps its configured value."""
    nlir_scales = list(cfg.nlir_scales if nlir_scales is None else nlir_scales)
    fgma_scales = list(cfg.fgma_scales if fgma_scales is None else fgma_scales)
    base = train(cfg, method="fedavg").mean
    rows = []
    for s in nlir_scales:
        m = train(cfg, method="s2fgl", lambda1=float(s)).mean
        rows.append(("nlir", float(s), m, m - base))
    for s in fgma_scales:
        m = train(cfg, method="s2fgl", lambda2=float(s)).mean
        rows.append(("fgma", float(s), m, m - base))
    return rows


def run_sensitivity(cfg: ExperimentConfig, nlir_scales=None, fgma_scales=None) -> Path:
    rows = sensitivity(cfg, nlir_scales, fgma_scales)
    path = output_dir(cfg) / "sensitivity.csv"
    _write_csv(
        path,
        SENSITIVITY_SCHEMA,
        ["factor", "scale", "mean_accuracy", "delta_vs_fedavg"],
        [[f, _fmt(s), _fmt(m), _fmt(d)] for f, s, m, d in rows],
    )
    return path


__all__ = [
    "MetricsRecord",
    "ablation",
    "emit_sis_curve",
    "emit_spectral_heatmap",
    "final_metric",
    "run_ablation",
    "run_experiment",
    "run_sensitivity",
    "sensitivity",
    "sis_curve",
    "spectral_heatmap",
]
