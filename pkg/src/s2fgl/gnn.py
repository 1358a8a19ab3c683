"""Two-layer GCN and a simplified adaptive channel-mixing (ACM) GCN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import Graph, normalized_adjacency


@dataclass
class ModelParams:
    """Ordered parameter list; the order is what FedAvg aligns on."""

    backbone: str
    params: list

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def copy(self) -> "ModelParams":
        return ModelParams(self.backbone, [p.copy() for p in self.params])

    def shapes(self):
        return [p.shape for p in self.params]

    def flat(self) -> np.ndarray:
        return np.concatenate([p.value.ravel() for p in self.params])

    def zero_grad(self):
        ad.zero_grad(self.params)


@dataclass
class ModelOutput:
    hidden: ad.Tensor
    logits: ad.Tensor


def glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(backbone: str, d: int, hidden: int, num_classes: int, rng) -> ModelParams:
    if backbone == "gcn":
        return ModelParams(
            "gcn",
            [ad.Parameter(glorot(rng, d, hidden), "W1"), ad.Parameter(glorot(rng, hidden, num_classes), "W2")],
        )
    if backbone == "acm":
        params = []
        for layer, (fi, fo) in enumerate(((d, hidden), (hidden, num_classes)), start=1):
            for ch in ("low", "high", "id"):
                params.append(ad.Parameter(glorot(rng, fi, fo), f"L{layer}.W_{ch}"))
            for ch in ("low", "high", "id"):
                params.append(ad.Parameter(glorot(rng, fo, 1), f"L{layer}.a_{ch}"))
            params.append(ad.Parameter(np.zeros((1, 3)), f"L{layer}.mix_bias"))
        return ModelParams("acm", params)
    raise ValueError(f"unknown backbone {backbone!r}")


class Propagation:
    """Cached ``A_hat`` (self-loop normalized adjacency) for one graph."""

    def __init__(self, g: Graph):
        self.a_hat = normalized_adjacency(g, add_self_loops=True)
        self.high = np.eye(g.n) - self.a_hat


def _check_dims(params: ModelParams, g: Graph):
    d_in = params.params[0].shape[0]
    if g.num_features != d_in:
        raise ad.ShapeError(f"model expects {d_in} input features, graph has {g.num_features}")


def gcn_forward(params: ModelParams, g: Graph, tape: ad.Tape | None = None, prop: Propagation | None = None) -> ModelOutput:
    """``H1 = relu(A X W1)``, ``logits = A H1 W2``."""
    _check_dims(params, g)
    prop = prop or Propagation(g)
    w1, w2 = (tape.watch(p) if tape else ad.Tensor(p.value) for p in params.params)
    ax = prop.a_hat @ g.features
    h1 = ad.relu(ad.matmul(ax, w1))
    logits = ad.matmul(prop.a_hat, ad.matmul(h1, w2))
    return ModelOutput(h1, logits)


def _acm_layer(x, ws, prop: Propagation):
    w_low, w_high, w_id, a_low, a_high, a_id, bias = ws
    h_low = ad.matmul(prop.a_hat, ad.matmul(x, w_low))
    h_high = ad.matmul(prop.high, ad.matmul(x, w_high))
    h_id = ad.matmul(x, w_id)
    scores = ad.concat_cols([ad.matmul(h_low, a_low), ad.matmul(h_high, a_high), ad.matmul(h_id, a_id)])
    mix = ad.softmax_rows(scores + bias)
    out = ad.mul(ad.take_cols(mix, 0, 1), h_low)
    out = out + ad.mul(ad.take_cols(mix, 1, 2), h_high)
    return out + ad.mul(ad.take_cols(mix, 2, 3), h_id)


def acm_forward(params: ModelParams, g: Graph, tape: ad.Tape | None = None, prop: Propagation | None = None) -> ModelOutput:
    """Per layer: low-pass, high-pass and identity channels mixed by a per-node softmax."""
    _check_dims(params, g)
    prop = prop or Propagation(g)
    ws = [tape.watch(p) if tape else ad.Tensor(p.value) for p in params.params]
    x = ad.Tensor(g.features)
    h1 = ad.relu(_acm_layer(x, ws[:7], prop))
    logits = _acm_layer(h1, ws[7:], prop)
    return ModelOutput(h1, logits)


def forward(params: ModelParams, g: Graph, tape: ad.Tape | None = None, prop: Propagation | None = None) -> ModelOutput:
    if params.backbone == "gcn":
        return gcn_forward(params, g, tape, prop)
    if params.backbone == "acm":
        return acm_forward(params, g, tape, prop)
    raise ValueError(f"unknown backbone {params.backbone!r}")
