"""Simulated subgraph federation: clients, rounds, aggregation and evaluation."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .gnn import ModelParams, Propagation, forward, init_params
from .graph import Graph, SplitMasks, induced_subgraph, stratified_split
from .losses import (
    LossWeights,
    PrototypeRepository,
    aggregate_global_repository,
    fgma_loss,
    fkd_loss,
    local_prototypes,
    total_loss,
)
from .partition import louvain_partition
from .ppr import ppr_auto, salc, select_top_k, sis
from .spectral import similarity_basis

logger = logging.getLogger(__name__)

METHODS = ("fedavg", "fedprox", "s2fgl", "nlir-only", "fgma-only")

# Streams of the seed derivation tree: default_rng([seed, stream, client, round]).
STREAM_SPLIT, STREAM_INIT, STREAM_PROTO = 1, 2, 3


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    method: str = "s2fgl"
    backbone: str = "gcn"
    num_clients: int = 10
    rounds: int = 100
    local_epochs: int = 3
    lr: float = 0.2
    weight_decay: float = 5e-4
    hidden: int = 64
    lambda1: float = 10.0
    lambda2: float = 0.5
    mu: float = 0.01
    damping_alpha: float = 0.85
    k_fraction: float = 1.0 / 3.0
    k_sim: int = 10
    k_eig: int = 4
    proto_fraction: float = 0.5
    num_anchors: int = 4
    temperature: float = 1.0
    split: tuple = (0.6, 0.2, 0.2)
    final_window: int = 5

    def loss_weights(self) -> LossWeights:
        nlir = self.method in ("s2fgl", "nlir-only")
        fgma = self.method in ("s2fgl", "fgma-only")
        return LossWeights(self.lambda1 if nlir else 0.0, self.lambda2 if fgma else 0.0)


@dataclass
class ClientState:
    client_id: int
    subgraph: Graph
    parent_ids: np.ndarray
    masks: SplitMasks
    selected_nodes: np.ndarray
    prop: Propagation = field(repr=False)
    sis: float = 0.0
    model: ModelParams | None = None

    @property
    def num_nodes(self) -> int:
        return self.subgraph.n


@dataclass
class ServerState:
    global_model: ModelParams
    repository: PrototypeRepository | None = None
    round: int = 0


@dataclass
class RoundReport:
    round: int
    ce: list
    fkd: list
    fgma: list
    test_accuracy: float
    val_accuracy: float
    sis: float
    wall_time: float = 0.0

    def to_dict(self, with_time: bool = True) -> dict:
        d = asdict(self)
        if not with_time:
            d.pop("wall_time")
        return d


@dataclass
class TrainingResult:
    seeds: list
    reports: list
    finals: list
    mean: float
    std: float


# -- setup ----------------------------------------------------------------


def build_clients(g: Graph, cfg: TrainConfig, seed: int, masks: SplitMasks | None = None) -> list[ClientState]:
    """Split, partition with Louvain and precompute SALC selections for every client."""
    masks = masks or stratified_split(g, cfg.split, seed=int(np.random.default_rng([seed, STREAM_SPLIT]).integers(2**31)))
    plan = louvain_partition(g, cfg.num_clients, seed=seed)
    clients = []
    for cid in range(plan.num_clients):
        nodes = plan.members(cid)
        sub = induced_subgraph(g, nodes).graph
        cmask = masks.restrict(nodes)
        scores = salc(sub, cmask.train, cfg.damping_alpha)
        selected = select_top_k(scores, cfg.k_fraction)
        client_sis = sis(ppr_auto(sub, cfg.damping_alpha), cmask.train) if cmask.train.any() else 0.0
        clients.append(ClientState(cid, sub, nodes, cmask, selected, Propagation(sub), client_sis))
    return clients


def init_global_model(g: Graph, cfg: TrainConfig, seed: int) -> ModelParams:
    rng = np.random.default_rng([seed, STREAM_INIT])
    return init_params(cfg.backbone, g.num_features, cfg.hidden, g.num_classes, rng)


# -- aggregation and regularizers -----------------------------------------


def fedavg_aggregate(client_models, weights) -> ModelParams:
    """Weighted parameter mean, accumulated as offsets from the first model.

    Written as ``p0 + sum w_i (p_i - p0)`` so identical inputs come back
    bit-for-bit unchanged.
    """
    models = list(client_models)
    w = np.asarray(weights, dtype=np.float64)
    if not models or w.size != len(models) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("need one non-negative weight per model with a positive total")
    ref = models[0]
    for m in models[1:]:
        if m.shapes() != ref.shapes():
            raise ad.ShapeError("client models have different parameter shapes")
    w = w / w.sum()
    out = ref.copy()
    for j, p in enumerate(out.params):
        acc = ref.params[j].value.copy()
        for i in range(1, len(models)):
            acc = acc + w[i] * (models[i].params[j].value - ref.params[j].value)
        p.value = acc
        p.zero_grad()
    return out


def fedprox_regularizer(local, global_params, mu: float) -> ad.Tensor:
    """``(mu / 2) * sum ||w_local - w_global||^2`` over paired parameters."""
    out = ad.Tensor(np.zeros((1, 1)))
    if mu == 0:
        return out
    for w, wg in zip(local, global_params):
        wg = wg.value if isinstance(wg, (ad.Parameter, ad.Tensor)) else wg
        d = ad.sub(w, wg)
        out = out + ad.total(ad.mul(d, d))
    return ad.scale(out, mu / 2.0)


# -- training -------------------------------------------------------------


def local_train(client: ClientState, server: ServerState, cfg: TrainConfig, global_hidden: np.ndarray):
    """Run the local epochs; returns the trained model and the last epoch's loss parts."""
    model = server.global_model.copy()
    weights = cfg.loss_weights()
    g = client.subgraph
    parts = (0.0, 0.0, 0.0)
    if not client.masks.train.any():
        logger.warning("client %d has no training nodes; returns the global model", client.client_id)
        return model, parts
    use_fkd = weights.lambda1 > 0 and server.repository is not None and server.repository.present.any()
    use_fgma = weights.lambda2 > 0 and g.n >= 2 * cfg.k_eig
    global_basis = similarity_basis(global_hidden, cfg.k_sim, cfg.k_eig) if use_fgma else None
    for _ in range(cfg.local_epochs):
        model.zero_grad()
        tape = ad.Tape()
        leaves = [tape.watch(p) for p in model.params]
        out = forward(model, g, tape, client.prop)
        ce = ad.cross_entropy(out.logits, g.labels, client.masks.train)
        fkd = fkd_loss(out.hidden, global_hidden, server.repository, temperature=cfg.temperature) if use_fkd else None
        fgma = (
            fgma_loss(out.hidden, global_hidden, cfg.k_sim, cfg.k_eig, global_basis=global_basis) if use_fgma else None
        )
        loss = total_loss(ce, fkd, fgma, weights)
        if cfg.method == "fedprox":
            loss = loss + fedprox_regularizer(leaves, server.global_model.params, cfg.mu)
        if not math.isfinite(loss.item()):
            raise TrainingDiverged(f"client {client.client_id}: non-finite loss")
        tape.backward(loss)
        ad.sgd_step(model.params, cfg.lr, cfg.weight_decay)
        parts = (ce.item(), fkd.item() if fkd is not None else 0.0, fgma.item() if fgma is not None else 0.0)
    return model, parts


def _predict(model: ModelParams, client: ClientState) -> np.ndarray:
    return forward(model, client.subgraph, None, client.prop).logits.value.argmax(axis=1)


def evaluate(model: ModelParams, clients, split: str = "test") -> float:
    """Micro-averaged accuracy of ``model`` over every client's ``split`` nodes."""
    correct = 0
    count = 0
    for c in clients:
        mask = getattr(c.masks, split)
        if not mask.any():
            continue
        pred = _predict(model, c)
        correct += int((pred[mask] == c.subgraph.labels[mask]).sum())
        count += int(mask.sum())
    if count == 0:
        raise ValueError(f"no {split} nodes on any client")
    return correct / count


def run_round(server: ServerState, clients, cfg: TrainConfig, seed: int = 0):
    """One communication round; returns the new server state and its report."""
    start = time.perf_counter()
    rnd = server.round + 1
    weights = cfg.loss_weights()
    uploads = []
    models = []
    ce, fkd, fgma = [], [], []
    for client in sorted(clients, key=lambda c: c.client_id):
        try:
            global_hidden = forward(server.global_model, client.subgraph, None, client.prop).hidden.value
            if weights.lambda1 > 0:
                uploads.append(
                    local_prototypes(global_hidden, client.subgraph.labels, _proto_nodes(client), client.subgraph.num_classes)
                )
            model, parts = local_train(client, server, cfg, global_hidden)
        except ad.NonFiniteError as exc:
            raise TrainingDiverged(f"round {rnd}, client {client.client_id}: {exc}") from exc
        client.model = model
        models.append(model)
        ce.append(parts[0])
        fkd.append(parts[1])
        fgma.append(parts[2])
    new_model = fedavg_aggregate(models, [c.num_nodes for c in sorted(clients, key=lambda c: c.client_id)])
    repo = server.repository
    if uploads:
        rng = np.random.default_rng([seed, STREAM_PROTO, 0, rnd])
        repo = aggregate_global_repository(uploads, cfg.proto_fraction, rng, cfg.num_anchors)
    new_server = ServerState(new_model, repo, rnd)
    report = RoundReport(
        round=rnd,
        ce=ce,
        fkd=fkd,
        fgma=fgma,
        test_accuracy=evaluate(new_model, clients, "test"),
        val_accuracy=evaluate(new_model, clients, "val") if any(c.masks.val.any() for c in clients) else 0.0,
        sis=float(sum(c.sis for c in clients)),
    )
    report.wall_time = time.perf_counter() - start
    return new_server, report


def _proto_nodes(client: ClientState) -> np.ndarray:
    """SALC-selected nodes that are also training nodes (labels are only trusted there)."""
    sel = client.selected_nodes
    return sel[client.masks.train[sel]]


def train_one_seed(g: Graph, cfg: TrainConfig, seed: int, on_round=None):
    if cfg.method not in METHODS:
        raise ValueError(f"unknown method {cfg.method!r}; expected one of {METHODS}")
    clients = build_clients(g, cfg, seed)
    server = ServerState(init_global_model(g, cfg, seed))
    reports = []
    for _ in range(cfg.rounds):
        server, report = run_round(server, clients, cfg, seed)
        reports.append(report)
        if on_round is not None:
            on_round(seed, report)
    return reports


def final_metric(reports, window: int = 5) -> float:
    tail = reports[-window:]
    return float(np.mean([r.test_accuracy for r in tail]))


def run_training(cfg: TrainConfig, seeds, graph_for_seed, on_round=None) -> TrainingResult:
    """Train once per seed; ``graph_for_seed(seed)`` supplies the dataset."""
    seeds = list(seeds)
    reports, finals = [], []
    for seed in seeds:
        rep = train_one_seed(graph_for_seed(seed), cfg, seed, on_round)
        reports.append(rep)
        finals.append(final_metric(rep, cfg.final_window))
    std = float(np.std(finals, ddof=1)) if len(finals) > 1 else 0.0
    return TrainingResult(seeds, reports, finals, float(np.mean(finals)), std)
